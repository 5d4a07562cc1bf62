use sha2::{Digest, Sha256};

use rootforest::graph::{grid_graph, GridGeometry, Topology};
use rootforest::render::{render_forest, RenderSpec};
use rootforest::wilson::sample_forest;
use rootforest::{KillingPlan, RngStream};

// Pins sampler, stream derivation and renderer together: any change to
// one of them shows up here.
const GOLDEN: &str = "1a8b03cd1013cdd6b13a643fdbfa26c8f4b0e281935b92bcc675d70241e0941b";

#[test]
fn torus_picture_is_stable() {
    let (w, h) = (96, 64);
    let g = grid_graph(w, h, Topology::Torus, None).unwrap();
    let plan = KillingPlan::uniform(g.n(), 0.001).unwrap();
    let forest = sample_forest(&g, &plan, &mut RngStream::new(2024, 0)).forest;
    let mut spec = RenderSpec::new(GridGeometry::new(w, h, Topology::Torus));
    spec.cell = 4;
    let bytes = render_forest(&forest, &spec).unwrap().to_p6();
    let digest: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(digest, GOLDEN);
}
