//! Every runnable example, executed as a test with small settings.

mod generate_mesh {
    include!("../examples/generate_mesh.rs");

    #[test]
    fn writes_one_obj_pair_per_generator() {
        let dir = tempfile::tempdir().unwrap();
        let counts = run_example(dir.path()).unwrap();
        assert_eq!(counts.iter().map(|c| c.0.as_str()).collect::<Vec<_>>(), ["chair", "table", "vase"]);
        assert_eq!(counts[0].1, 72);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 6);
    }
}

mod canonical_space {
    include!("../examples/canonical_space.rs");

    #[test]
    fn round_trip_is_exact() {
        assert!(run_example().unwrap() < 1e-9);
    }
}

mod render_views {
    include!("../examples/render_views.rs");

    #[test]
    fn views_overlap_but_differ() {
        let dir = tempfile::tempdir().unwrap();
        let ious = run_example(dir.path()).unwrap();
        assert!(!ious.is_empty());
        assert!(ious.iter().all(|v| (0.0..=1.0).contains(v)));
        for f in ["vase_shaded.pgm", "vase_mask.pgm", "vase_edges.pgm"] {
            let img = procinv::render::Image::read_pgm(std::fs::File::open(dir.path().join(f)).unwrap()).unwrap();
            assert_eq!(img.width, 96);
        }
    }
}

mod noise_schedule {
    include!("../examples/noise_schedule.rs");

    #[test]
    fn exact_noise_is_undone() {
        assert!(run_example().unwrap() < 1e-9);
    }
}

mod dataset_files {
    include!("../examples/dataset_files.rs");

    #[test]
    fn split_is_ninety_ten() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(run_example(dir.path()).unwrap(), (36, 4));
    }
}

mod train_and_invert {
    include!("../examples/train_and_invert.rs");

    #[test]
    fn loss_falls_and_candidates_are_ranked() {
        let dir = tempfile::tempdir().unwrap();
        let (losses, scores) = run_example(dir.path(), 60).unwrap();
        assert_eq!(losses.len(), 60);
        let head: f64 = losses[..10].iter().sum::<f64>() / 10.0;
        let tail: f64 = losses[50..].iter().sum::<f64>() / 10.0;
        assert!(tail < head, "{head} -> {tail}");
        assert!(scores.windows(2).all(|w| w[0] <= w[1]));
        assert!(dir.path().join("loss.csv").exists());
    }
}

mod mcmc_search {
    include!("../examples/mcmc_search.rs");

    #[test]
    fn chain_finds_the_silhouette() {
        let (iou, forwards) = run_example(400).unwrap();
        assert_eq!(forwards, 401);
        assert!(iou > 0.8, "{iou}");
    }
}

mod shape_metrics {
    include!("../examples/shape_metrics.rs");

    #[test]
    fn oracle_beats_perturbed_beats_random() {
        let (oracle, nudged, random) = run_example().unwrap();
        assert!(oracle > nudged && nudged > random, "{oracle} {nudged} {random}");
    }
}

mod http_service {
    include!("../examples/http_service.rs");

    #[test]
    fn status_codes() {
        assert_eq!(run_example().unwrap(), [200, 200, 200, 422, 200, 503]);
    }
}
