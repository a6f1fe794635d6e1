use nalgebra::Point3;
use wildannot_core::geom::{interpolate_pose, CameraRig, Pose};
use wildannot_core::normals::{estimate_normals, NormalParams, OrientationSource};
use wildannot_core::synth::*;
use wildannot_core::visibility::*;

fn main() {
    let spec = ForestSpec {
        extent: 40.0, ground_spacing: 0.2, trunk_count: 50,
        trunk_radius_min: 0.25, trunk_radius_max: 0.45,
        trunk_height: 6.0, trunk_spacing: 0.06, sweep_duration: 60.0,
    };
    let forest = gen_forest(&spec, 4242);
    let ground_count = 201usize * 201;
    let map = forest.to_map().unwrap();
    println!("scene: {} points ({} ground)", map.len(), ground_count);
    let trajectory = straight_trajectory(-18.0, 18.0, 0.0, 1.8, 0.0, 10.0, 10).unwrap();
    let rig = CameraRig::new(300.0, 300.0, 256.0, 192.0, 512, 384, Pose::identity()).unwrap();
    let camera_pose = rig.camera_pose(&interpolate_pose(&trajectory, 2.0).unwrap());
    println!("camera at {:?}", camera_pose.position());

    let normals = estimate_normals(&map, &NormalParams::default(), OrientationSource::PerPointOrigins).unwrap();
    let invalid = normals.valid.iter().filter(|v| !**v).count();
    println!("normals invalid: {invalid}");

    let stages = visibility_stages(&map, &normals, &camera_pose, &rig, &GhprConfig::default()).unwrap();
    let oracle = oracle_visibility(&forest, &camera_pose, &rig,
        &OracleParams { surfel_radius: None, strict_slack: 0.05 });

    let mut stage_hist = std::collections::BTreeMap::new();
    for (i, s) in stages.iter().enumerate() {
        let class = if i < ground_count { "ground" } else { "trunk" };
        *stage_hist.entry((class, s.as_str())).or_insert(0usize) += 1;
    }
    println!("{:#?}", stage_hist);

    // fn breakdown: oracle visible but dropped, by stage and class
    let mut fn_hist = std::collections::BTreeMap::new();
    let mut fn_dist = Vec::new();
    for i in 0..map.len() {
        if oracle[i] && stages[i] != DropStage::None {
            let class = if i < ground_count { "ground" } else { "trunk" };
            *fn_hist.entry((class, stages[i].as_str())).or_insert(0usize) += 1;
            fn_dist.push((map.points()[i] - camera_pose.position()).norm());
        }
    }
    println!("false-negative breakdown: {:#?}", fn_hist);
    fn_dist.sort_by(|a,b| a.partial_cmp(b).unwrap());
    if !fn_dist.is_empty() {
        println!("fn distance percentiles: p5 {:.1} p50 {:.1} p95 {:.1}",
            fn_dist[fn_dist.len()/20], fn_dist[fn_dist.len()/2], fn_dist[fn_dist.len()*19/20]);
    }
}
