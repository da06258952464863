use qvs::campaigns::{run_campaign, CampaignConfig, CampaignLog, InitialData, PolicyKind, Problem};
use qvs::problems::{
    clustered_binary_pool, draw_initial_indices, two_group_pool, BinaryPool, ClusterPoolParams,
    TwoGroupParams,
};
use qvs::spectral::euclidean_distance;
use qvs::surrogates::gp_fit_pool;
use qvs::{build_kernel_matrix, vendi_score_of_subset, KernelSpec, Order};

fn as_config(budget: usize, order: Order, seed: u64) -> CampaignConfig {
    let mut cfg = CampaignConfig::new(budget, 5, order, seed);
    cfg.classifier.k_neighbors = 3;
    cfg.classifier.smoothing = 0.1;
    cfg
}

#[test]
fn two_cluster_search_finds_both_clusters() {
    let params = ClusterPoolParams::two_cluster();
    let spec = KernelSpec::gaussian(0.5).unwrap();
    let (mut qvs_both, mut blind_single) = (0, 0);
    for seed in 0..10u64 {
        let pool = clustered_binary_pool(&params, 700 + seed).unwrap();
        let init = InitialData::Indices(draw_initial_indices(pool.len(), 10, seed).unwrap());
        let hits = |log: &CampaignLog| {
            let mut h = [false; 2];
            for p in log.positives() {
                h[params.nearest_center(p)] = true;
            }
            h
        };
        let a = run_campaign(
            PolicyKind::QvsAs,
            Problem::Binary(&pool),
            &init,
            &as_config(30, Order::SHANNON, seed),
            &spec,
        )
        .unwrap();
        let b = run_campaign(
            PolicyKind::DiversityBlindAs,
            Problem::Binary(&pool),
            &init,
            &as_config(30, Order::COUNT, seed),
            &spec,
        )
        .unwrap();
        qvs_both += hits(&a).iter().all(|&h| h) as usize;
        blind_single += (hits(&b).iter().filter(|&&h| h).count() <= 1) as usize;
    }
    assert!(
        qvs_both >= 9,
        "qvs-as reached both clusters in {qvs_both}/10"
    );
    assert!(
        blind_single >= 8,
        "diversity-blind stayed in one cluster in {blind_single}/10"
    );
}

#[test]
fn equal_probabilities_reduce_to_vendi_gain() {
    let pts: Vec<Vec<f64>> = (0..12)
        .map(|i| vec![(i as f64 * 0.71).sin(), (i as f64 * 1.37).cos()])
        .collect();
    let mut labels = vec![false; 12];
    labels[0] = true;
    let pool = BinaryPool::new(pts.clone(), labels).unwrap();
    let spec = KernelSpec::gaussian(0.4).unwrap();
    // one positive and one negative with k above the training size: every candidate gets 0.5
    let mut cfg = CampaignConfig::new(1, 1, Order::SHANNON, 0);
    cfg.classifier.k_neighbors = 15;
    let log = run_campaign(
        PolicyKind::QvsAs,
        Problem::Binary(&pool),
        &InitialData::Indices(vec![0, 1]),
        &cfg,
        &spec,
    )
    .unwrap();

    let kernel = build_kernel_matrix(&spec, &pts).unwrap();
    let mut best = (usize::MAX, f64::NEG_INFINITY);
    for c in 2..12 {
        let vs = vendi_score_of_subset(&kernel, &[0, c], Order::SHANNON).unwrap();
        if vs > best.1 + 1e-12 {
            best = (c, vs);
        }
    }
    assert_eq!(log.queries().next().unwrap().index, Some(best.0));
}

#[test]
fn zero_beta_zero_order_follows_the_posterior_mean() {
    let params = TwoGroupParams {
        pool_size: 50,
        ..TwoGroupParams::default()
    };
    let pool = two_group_pool(&params, 41).unwrap();
    let spec = KernelSpec::gaussian(0.4).unwrap();
    let initial = draw_initial_indices(50, 4, 41).unwrap();
    let mut cfg = CampaignConfig::new(12, 3, Order::COUNT, 41);
    cfg.beta = 0.0;
    let log = run_campaign(
        PolicyKind::QvsBayesoptDiscrete,
        Problem::Real(&pool),
        &InitialData::Indices(initial.clone()),
        &cfg,
        &spec,
    )
    .unwrap();

    // replay: refit on everything seen so far, take the best posterior means
    let kernel = build_kernel_matrix(&spec, pool.points()).unwrap();
    let mut observed = initial;
    let all: Vec<usize> = (0..50).collect();
    for iteration in 1..=4 {
        let values: Vec<f64> = observed.iter().map(|&i| pool.value(i)).collect();
        let gp = gp_fit_pool(&kernel, &observed, &values, &cfg.gp).unwrap();
        let (means, _) = gp.marginals(&all).unwrap();
        let mut ranked: Vec<usize> = all
            .iter()
            .copied()
            .filter(|i| !observed.contains(i))
            .collect();
        ranked.sort_by(|&a, &b| means[b].total_cmp(&means[a]).then(a.cmp(&b)));
        let want: Vec<usize> = ranked[..3].to_vec();
        let got: Vec<usize> = log
            .queries()
            .filter(|e| e.iteration == iteration)
            .map(|e| e.index.unwrap())
            .collect();
        assert_eq!(got, want, "iteration {iteration}");
        observed.extend(got);
    }
}

#[test]
fn discrete_qvs_visits_both_groups_while_ucb_stays() {
    let params = TwoGroupParams::default();
    let spec = KernelSpec::gaussian(0.3).unwrap();
    let in_group =
        |x: &[f64], g: usize| euclidean_distance(x, &params.centers[g]) <= 2.0 * params.width;
    let (mut qvs_both, mut ucb_single) = (0, 0);
    for seed in 0..10u64 {
        let pool = two_group_pool(&params, 300 + seed).unwrap();
        let init = InitialData::Indices(draw_initial_indices(pool.len(), 3, seed).unwrap());
        let groups = |policy, order| {
            let mut cfg = CampaignConfig::new(20, 2, order, seed);
            cfg.beta = 0.5;
            let log = run_campaign(policy, Problem::Real(&pool), &init, &cfg, &spec).unwrap();
            let mut g = [false; 2];
            for e in log.queries() {
                for (k, hit) in g.iter_mut().enumerate() {
                    *hit |= in_group(&e.point, k);
                }
            }
            g
        };
        qvs_both += groups(PolicyKind::QvsBayesoptDiscrete, Order::SHANNON)
            .iter()
            .all(|&h| h) as usize;
        ucb_single += (groups(PolicyKind::Ucb, Order::COUNT)
            .iter()
            .filter(|&&h| h)
            .count()
            == 1) as usize;
    }
    assert!(qvs_both >= 8, "qvs reached both groups in {qvs_both}/10");
    assert!(
        ucb_single >= 8,
        "ucb stayed in one group in {ucb_single}/10"
    );
}

#[test]
fn random_campaigns_replay_identically() {
    let pool = clustered_binary_pool(
        &ClusterPoolParams {
            pool_size: 80,
            ..ClusterPoolParams::two_cluster()
        },
        5,
    )
    .unwrap();
    let spec = KernelSpec::gaussian(0.5).unwrap();
    let cfg = CampaignConfig::new(20, 4, Order::COUNT, 77);
    let init = InitialData::Indices(vec![1, 2]);
    let a = run_campaign(
        PolicyKind::Random,
        Problem::Binary(&pool),
        &init,
        &cfg,
        &spec,
    )
    .unwrap();
    let b = run_campaign(
        PolicyKind::Random,
        Problem::Binary(&pool),
        &init,
        &cfg,
        &spec,
    )
    .unwrap();
    assert_eq!(a, b);
}
