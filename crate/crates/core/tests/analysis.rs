use negmargin_core::analysis::{
    angular_histogram, class_centers, confusion_from_scores, confusion_profile, embeddings_csv,
    export_embeddings, read_embeddings, variance_report, Discriminability,
};
use negmargin_core::data::{gen_synthetic, LabeledDataset, SplitTag, SyntheticConfig};
use negmargin_core::model::{Activation, BackboneConfig, Network, SimilarityKind};
use negmargin_core::numerics::{Matrix, Rng};

fn random_matrix(rng: &mut Rng, rows: usize, cols: usize) -> Matrix<f64> {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.normal()).collect()).unwrap()
}

/// Double loops over raw vectors, no shared helpers.
fn brute_force_phi(features: &Matrix<f64>, labels: &[usize], c: usize) -> (f64, f64) {
    let d = features.cols();
    let mut centers = vec![vec![0.0; d]; c];
    let mut counts = vec![0.0; c];
    for i in 0..features.rows() {
        let row = features.row(i);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        for k in 0..d {
            centers[labels[i]][k] += row[k] / norm;
        }
        counts[labels[i]] += 1.0;
    }
    for j in 0..c {
        for k in 0..d {
            centers[j][k] /= counts[j];
        }
    }
    let mut inter = 0.0;
    for a in 0..c {
        for b in 0..c {
            if a != b {
                inter += (0..d).map(|k| (centers[a][k] - centers[b][k]).powi(2)).sum::<f64>();
            }
        }
    }
    inter /= (c * (c - 1)) as f64;
    let mut intra_sum = vec![0.0; c];
    for i in 0..features.rows() {
        let row = features.row(i);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        intra_sum[labels[i]] += (0..d).map(|k| (row[k] / norm - centers[labels[i]][k]).powi(2)).sum::<f64>();
    }
    let intra = (0..c).map(|j| intra_sum[j] / counts[j]).sum::<f64>() / c as f64;
    (inter, intra)
}

#[test]
fn variance_report_matches_brute_force() {
    let mut rng = Rng::new(21);
    for _ in 0..100 {
        let c = 2 + rng.below(4);
        let d = 2 + rng.below(4);
        let n = c * (1 + rng.below(8)) + rng.below(5);
        let labels: Vec<usize> = (0..n).map(|i| if i < c { i } else { rng.below(c) }).collect();
        let x = random_matrix(&mut rng, n, d);
        let r = variance_report(&x, &labels, c, SplitTag::Base, 0.0).unwrap();
        let (inter, intra) = brute_force_phi(&x, &labels, c);
        assert!((r.d_inter - inter).abs() <= 1e-12);
        assert!((r.d_intra - intra).abs() <= 1e-12);
        if intra == 0.0 {
            assert!(r.phi.is_infinite());
        } else {
            assert!((r.phi.value() - inter / intra).abs() <= 1e-9 * (inter / intra).max(1.0));
        }
    }
}

#[test]
fn hand_examples() {
    let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let centers = class_centers(&x, &[0, 0], 1).unwrap();
    assert_eq!(centers.row(0), &[0.5, 0.5]);

    let r = variance_report(&x, &[0, 1], 2, SplitTag::Novel, 0.1).unwrap();
    assert_eq!(r.d_inter, 2.0);
    assert_eq!(r.d_intra, 0.0);
    assert_eq!(r.phi, Discriminability::Infinite);
    assert_eq!(r.csv_row(), "0.1,novel,2,0,inf");
}

#[test]
fn zero_noise_synthetic_clusters_have_no_spread() {
    let ds = gen_synthetic(&SyntheticConfig {
        n_classes: 4,
        per_class: 5,
        dim: 3,
        cluster_std: 0.0,
        confusability: 0.5,
        seed: 1,
        n_base: None,
    })
    .unwrap();
    let r = variance_report(ds.features(), ds.labels(), 4, SplitTag::Base, 0.0).unwrap();
    assert!(r.d_intra < 1e-24);
    assert!(r.d_inter > 0.0);
}

#[test]
fn confusion_matches_brute_force_softmax_average() {
    let mut rng = Rng::new(5);
    for _ in 0..20 {
        let n_novel = 1 + rng.below(3);
        let n = n_novel * 4;
        let labels: Vec<usize> = (0..n).map(|i| i % n_novel).collect();
        let scores = random_matrix(&mut rng, n, 4);
        let beta = 0.5 + 10.0 * rng.uniform();
        let c = confusion_from_scores(&scores, &labels, n_novel, beta).unwrap();
        for j in 0..n_novel {
            let mut expected = [0.0; 4];
            let mut count = 0.0;
            for i in (0..n).filter(|&i| labels[i] == j) {
                let e: Vec<f64> = scores.row(i).iter().map(|s| (beta * s).exp()).collect();
                let z: f64 = e.iter().sum();
                for k in 0..4 {
                    expected[k] += e[k] / z;
                }
                count += 1.0;
            }
            for k in 0..4 {
                assert!((c.p.get(j, k) - expected[k] / count).abs() <= 1e-12);
            }
            let row_sum: f64 = c.p.row(j).iter().sum();
            assert!((row_sum - 1.0).abs() <= 1e-9);
            assert!(c.per_class[j] > 0.0 && c.per_class[j] <= 1.0);
            let hard: usize = c.hard_counts[j].iter().sum();
            assert_eq!(hard, 4);
        }
    }
}

#[test]
fn dominant_class_gives_one_hot_rows() {
    let s: Matrix<f64> = Matrix::from_rows(&[vec![1.0, -1.0, -1.0], vec![1.0, -1.0, -1.0]]).unwrap();
    let c = confusion_from_scores(&s, &[0, 0], 1, 500.0).unwrap();
    assert!((c.per_class[0] - 1.0).abs() < 1e-12);
    assert_eq!(c.hard_counts[0], vec![2, 0, 0]);
}

fn tiny_net(rng: &mut Rng) -> Network<f64> {
    let cfg = BackboneConfig {
        input_dim: 3,
        hidden_dims: vec![4],
        feature_dim: 2,
        activation: Activation::Tanh,
    };
    Network::new(cfg, 3, SimilarityKind::Cosine, rng).unwrap()
}

fn dataset(rng: &mut Rng, n: usize) -> LabeledDataset {
    LabeledDataset::new(
        random_matrix(rng, n, 3),
        (0..n).map(|i| i % 2).collect(),
        vec!["left".into(), "right".into()],
        SplitTag::Novel,
    )
    .unwrap()
}

#[test]
fn confusion_profile_rows_sum_to_one() {
    let mut rng = Rng::new(8);
    let net = tiny_net(&mut rng);
    let ds = dataset(&mut rng, 30);
    let c = confusion_profile(&net, &ds, 10.0).unwrap();
    for j in 0..2 {
        assert!((c.p.row(j).iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }
    let mean = c.per_class.iter().sum::<f64>() / 2.0;
    assert!((c.p_s - mean).abs() < 1e-15);
}

#[test]
fn uniform_angles_fill_bins_evenly() {
    let mut rng = Rng::new(13);
    let n = 8000;
    let bins = 16;
    let data: Vec<f64> = (0..n)
        .flat_map(|_| {
            let a = rng.uniform_in(0.0, std::f64::consts::TAU);
            [a.cos(), a.sin()]
        })
        .collect();
    let x = Matrix::from_vec(n, 2, data).unwrap();
    let h = angular_histogram(&x, &vec![0; n], 1, bins).unwrap();
    let expected = n as f64 / bins as f64;
    let chi2: f64 = h.counts[0].iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 15 degrees of freedom; the 99.9% quantile is 37.7.
    assert!(chi2 < 37.7, "chi-squared {chi2}");
    assert_eq!(h.counts[0].iter().sum::<usize>(), n);
}

#[test]
fn embeddings_export_and_read_back() {
    let mut rng = Rng::new(17);
    let net = tiny_net(&mut rng);
    let dir = tempfile::tempdir().unwrap();

    let empty = LabeledDataset::new(Matrix::zeros(0, 3), vec![], vec![], SplitTag::Novel).unwrap();
    assert_eq!(embeddings_csv(&net, &empty).unwrap(), "class,f0,f1\n");

    let three = dataset(&mut rng, 3);
    let path = dir.path().join("emb.csv");
    export_embeddings(&net, &three, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    for (row, &y) in rows.iter().zip(three.labels()) {
        assert!(row.starts_with(&format!("{},", three.class_names()[y])));
    }

    let (names, z) = read_embeddings(&path).unwrap();
    assert_eq!(names, vec!["left", "right", "left"]);
    assert_eq!(z, net.embed(three.features()).unwrap());
}

#[test]
fn export_reports_the_failing_path() {
    let mut rng = Rng::new(1);
    let net = tiny_net(&mut rng);
    let ds = dataset(&mut rng, 2);
    let bad = std::path::Path::new("/nonexistent-dir/emb.csv");
    let err = export_embeddings(&net, &ds, bad).unwrap_err();
    assert!(err.to_string().contains("/nonexistent-dir/emb.csv"));
}
