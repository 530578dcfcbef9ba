//! Load an experiment config the way the command line does and evaluate its queries.

use vertexflow::cli::{Experiment, ExperimentConfig};
use vertexflow::qmoments::{qmoment_skew, QuadOptions};

const CONFIG: &str = include_str!("../../../docs/configs/sc6v.json");

fn main() {
    let cfg = match ExperimentConfig::from_json(CONFIG) {
        Ok(c) => c,
        Err(e) => panic!("config rejected: {e:?}"),
    };
    let Ok(Experiment::Sc6v { domain, params }) = cfg.resolve() else { panic!("expected a six-vertex experiment") };
    for query in &cfg.queries {
        match qmoment_skew(&domain, &params, query, &QuadOptions::default()) {
            Ok(v) => println!("points {:?} colors {:?} pi {:?} -> {:.12}", query.points, query.colors, query.pi.images(), v.value.re),
            Err(e) => println!("{:?} -> {e}", query.points),
        }
    }
}
