//! Run the local-relation suite and print its report as JSON.

use vertexflow::verify::{run_suite, Suite, SuiteOptions};

fn main() -> vertexflow::Result<()> {
    let opts = SuiteOptions { trials: 200, ..Default::default() };
    let reports = run_suite(Suite::Local, &opts)?;
    println!("{}", serde_json::to_string_pretty(&reports).expect("reports serialize"));
    Ok(())
}
