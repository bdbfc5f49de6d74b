use bncbf::distance::{derivative_bound_terms, derivative_lower_bound, min_distance, MovingBody};
use bncbf::geometry::{Pose, PolytopeTemplate};
use nalgebra::Vector3;
use std::collections::BTreeMap;

fn main() {
    let tetra = PolytopeTemplate::tetrahedron().scaled(0.5).unwrap();
    let cube = PolytopeTemplate::cuboid(Vector3::new(0.6, 0.6, 0.6)).unwrap();
    let pose_a = Pose::new(Vector3::new(4.080766, 0.252205, 0.5), 0.0, 0.000998);
    let pose_cube = Pose::new(Vector3::new(4.6, -0.6, 0.6), 0.0, 0.0);
    let body_a = MovingBody::from_template(&tetra, &pose_a, 0).unwrap();
    let body_b = MovingBody::fixed(cube.instantiate(&pose_cube).unwrap());
    let r = min_distance(&body_a.poly, &body_b.poly, 0.15).unwrap();
    println!("h = {:.6}, dist = {:.6}", r.h, r.distance);
    println!("witness_a = {:?}", r.witness_a);
    println!("witness_b = {:?}", r.witness_b);
    println!("lambda_a = {:?}", r.lambda_a.as_slice());
    println!("lambda_b = {:?}", r.lambda_b.as_slice());

    let terms = derivative_bound_terms(&body_a, &body_b, &r, 0.01);
    // logged input: u=0.2, v=-0.1539, r=-0.001; theta=0 psi~0 => eta_dot ~ (0.2, -0.1539, 0, 0, -0.001)
    let eta_dot = [0.2, -0.1539, 0.0, 0.0, -0.001];
    let rates: BTreeMap<usize, [f64; 5]> = [(0usize, eta_dot)].into_iter().collect();
    let g = derivative_lower_bound(&terms, &rates, 1e5).unwrap();
    // finite difference of h along this pose rate
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
    println!("bound g = {g:.6}, fd hdot = {fd:.6}");
    // sign sets
    println!("sign_a = {:?}, sign_b = {:?}", terms.sign_a, terms.sign_b);
    println!("lam_dot_a coeff = {:?}", terms.lam_dot_a.as_slice());
    println!("lam_dot_b coeff = {:?}", terms.lam_dot_b.as_slice());
}
