use bncbf::constraints::LosCorridor;
use bncbf::distance::min_distance;
use bncbf::geometry::{Pose, PolytopeTemplate};
use nalgebra::Vector3;

fn main() {
    let corridor = LosCorridor::new(100.0, 0.0);
    let t = PolytopeTemplate::tetrahedron();
    // follower at (-3.7, 0.8), leader at (0.7, 0), obstacle bodies everywhere
    let followers = [
        (-0.9, 0.0), (-0.9, 1.6), (-0.9, -1.6), (-2.3, 0.8), (-2.3, -0.8),
        (-3.7, 0.8), (-3.7, -0.8), (-2.3, 2.4), (-2.3, -2.4),
    ];
    let leader = Pose::new(Vector3::new(0.7, 0.0, 0.0), 0.0, 0.0);
    for (i, f) in followers.iter().enumerate() {
        let fi = Pose::new(Vector3::new(f.0, f.1, 0.0), 0.0, 0.0);
        for (j, g) in followers.iter().enumerate() {
            if i == j { continue; }
            let body = t.instantiate(&Pose::new(Vector3::new(g.0, g.1, 0.0), 0.0, 0.0)).unwrap();
            let corr = corridor.over_bound(&fi, &leader).unwrap();
            match min_distance(&corr, &body, 0.0) {
                Ok(r) => { if r.h < 0.2 { println!("follower {i} blocker {j}: h = {:.4}", r.h); } }
                Err(e) => println!("follower {i} blocker {j}: ERROR {e}"),
            }
        }
    }
    println!("done");
}
