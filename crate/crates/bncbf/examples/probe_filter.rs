use bncbf::composition::ActiveLeaf;
use bncbf::distance::{derivative_bound_terms, derivative_lower_bound, min_distance, MovingBody};
use bncbf::dynamics::{velocity_transform, ActuationMask, InputVector};
use bncbf::filter::{assemble, AgentChannel, FilterParams, NonsmoothRow};
use bncbf::geometry::{Pose, PolytopeTemplate};
use nalgebra::Vector3;
use std::collections::BTreeMap;

fn main() {
    let tetra = PolytopeTemplate::tetrahedron().scaled(0.5).unwrap();
    let cube = PolytopeTemplate::cuboid(Vector3::new(0.6, 0.6, 0.6)).unwrap();
    let pose_a = Pose::new(Vector3::new(4.080766, 0.252205, 0.5), 0.0, 0.000998);
    let pose_cube = Pose::new(Vector3::new(4.6, -0.6, 0.6), 0.0, 0.0);
    // agent slot 0 only (single controlled agent for the probe)
    let body_a = MovingBody::from_template(&tetra, &pose_a, 0).unwrap();
    let body_b = MovingBody::fixed(cube.instantiate(&pose_cube).unwrap());
    let r = min_distance(&body_a.poly, &body_b.poly, 0.15).unwrap();
    let terms = derivative_bound_terms(&body_a, &body_b, &r, 0.01);
    let channels = [AgentChannel {
        transform: velocity_transform(&pose_a).unwrap(),
        mask: ActuationMask::submerged_vessel(),
        input_limit: 0.2,
    }];
    let nominal = [InputVector::new(0.2, -0.152, 0.0, 0.0, -0.001)];
    let h_g = r.h;
    let rows = [NonsmoothRow {
        leaf: ActiveLeaf { leaf: 0, negated: false, effective: r.h },
        terms: terms.clone(),
        cache_step: 0,
    }];
    let problem = assemble(&channels, &nominal, h_g, &[], &rows, &FilterParams::default(), 0).unwrap();
    let sol = problem.solve().unwrap();
    println!("u_safe = {:?}", sol.inputs[0].as_slice());
    println!("lambda rates a = {:?}", sol.lambda_rates[0].0.as_slice());
    println!("lambda rates b = {:?}", sol.lambda_rates[0].1.as_slice());
    // evaluate the bound objective at the chosen point
    let eta_dot = {
        let j = velocity_transform(&pose_a).unwrap();
        let e = j * sol.inputs[0];
        [e[0], e[1], e[2], e[3], e[4]]
    };
    let rates: BTreeMap<usize, [f64; 5]> = [(0usize, eta_dot)].into_iter().collect();
    let ldot = terms.evaluate(&rates, &sol.lambda_rates[0].0, &sol.lambda_rates[0].1);
    let eqres = terms.equality_residual(&rates, &sol.lambda_rates[0].0, &sol.lambda_rates[0].1);
    println!("L-dot at chosen point = {ldot:.6} (needs >= {:.6})", -0.2 * h_g);
    println!("equality residual = {:.3e}", eqres.norm());
    let g = derivative_lower_bound(&terms, &rates, 1e5).unwrap();
    // FD along the chosen input
    let dt = 1e-6;
    let fd = {
        let shift = |s: f64| {
            let p = Pose::new(
                pose_a.position + Vector3::new(eta_dot[0], eta_dot[1], eta_dot[2]) * s,
                pose_a.theta + eta_dot[3] * s,
                pose_a.psi + eta_dot[4] * s,
            );
            let b = tetra.instantiate(&p).unwrap();
            min_distance(&b, &body_b.poly, 0.15).unwrap().h
        };
        (shift(dt) - shift(-dt)) / (2.0 * dt)
    };
    println!("lp max g = {g:.6}, fd hdot = {fd:.6}");
}
