use atomic_mimo::scenario::{empirical_snr, generate_trial, ChannelMode, Scenario, ScenarioConfig};

fn batch(cfg: &ScenarioConfig, trials: u64) -> Vec<Scenario> {
    (0..trials).map(|t| generate_trial(cfg, t).unwrap()).collect()
}

/// Mean and standard error of `|x|^2` over every entry.
fn second_moment(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut s, mut s2) = (0.0, 0.0, 0.0);
    for v in values {
        n += 1.0;
        s += v;
        s2 += v * v;
    }
    let mean = s / n;
    (mean, ((s2 / n - mean * mean) / n).sqrt())
}

#[test]
fn channel_power_matches_snr() {
    // K = 1, 0 dB: E|a_n1|^2 = sigma^2 = 1
    let cfg = ScenarioConfig::new(1000, 1, 4, 0.0, 0.0, 3);
    let scs = batch(&cfg, 1000);
    let (mean, se) = second_moment(scs.iter().flat_map(|s| s.channel.matrix().iter().map(|a| a.norm_sqr()).collect::<Vec<_>>()));
    assert!((mean - 1.0).abs() < 3.0 * se, "{mean} +- {se}");
}

#[test]
fn reference_to_signal_ratio() {
    let cfg = ScenarioConfig::new(1000, 2, 4, 2.0, 0.0, 4);
    let scs = batch(&cfg, 500);
    let (a, _) = second_moment(scs.iter().flat_map(|s| s.channel.matrix().iter().map(|a| a.norm_sqr()).collect::<Vec<_>>()));
    let (b, _) = second_moment(scs.iter().flat_map(|s| s.reference.iter().map(|b| b.norm_sqr()).collect::<Vec<_>>()));
    assert!((b / a - 1.0).abs() < 0.02, "{}", b / a);
}

#[test]
fn physical_mode_matches_normalized() {
    let mut norm = ScenarioConfig::new(500, 2, 16, 5.0, 12.0, 9);
    let mut phys = norm.clone();
    phys.mode = ChannelMode::Physical;
    norm.mode = ChannelMode::Normalized;
    let (n, p) = (batch(&norm, 1000), batch(&phys, 1000));
    let scaled = |scs: &[Scenario], pick: fn(&Scenario) -> Vec<f64>| {
        second_moment(scs.iter().flat_map(|s| pick(s).into_iter().map(move |v| v / s.sigma2))).0
    };
    let a = |s: &Scenario| s.channel.matrix().iter().map(|x| x.norm_sqr()).collect();
    let b = |s: &Scenario| s.reference.iter().map(|x| x.norm_sqr()).collect();
    let z = |s: &Scenario| s.z.values().iter().map(|x| x * x).collect();
    for (name, pick) in [("A", a as fn(&Scenario) -> Vec<f64>), ("b", b), ("z", z)] {
        let (mn, mp) = (scaled(&n, pick), scaled(&p, pick));
        assert!((mp / mn - 1.0).abs() < 0.01, "{name}: {mp} vs {mn}");
    }
}

#[test]
fn empirical_snr_tracks_configuration() {
    for snr in [3.0, -5.0] {
        let cfg = ScenarioConfig::new(36, 3, 16, snr, 12.0, 12);
        let scs = batch(&cfg, 100_000 / 36 + 1);
        let got = empirical_snr(&scs).unwrap();
        assert!((got - snr).abs() < 0.1, "{snr}: {got}");
    }
}

#[test]
fn quadrupled_noise_costs_six_db() {
    let cfg = ScenarioConfig::new(16, 2, 4, 4.0, 6.0, 13);
    let scs = batch(&cfg, 200);
    let louder: Vec<Scenario> = scs
        .iter()
        .cloned()
        .map(|mut s| {
            s.sigma2 *= 4.0;
            s
        })
        .collect();
    let drop = empirical_snr(&scs).unwrap() - empirical_snr(&louder).unwrap();
    assert!((drop - 10.0 * 4f64.log10()).abs() < 1e-9);
    assert!(empirical_snr(&[]).is_err());
}

#[test]
fn product_structure_second_moment() {
    // E|a|^2 = E[u^2] E|h|^2 = (1/3) * 3 snr / K * 1
    let cfg = ScenarioConfig::new(400, 4, 4, 6.0, 0.0, 21);
    let scales = cfg.scales().unwrap();
    let scs = batch(&cfg, 500);
    let (mean, se) = second_moment(scs.iter().flat_map(|s| s.channel.matrix().iter().map(|a| a.norm_sqr()).collect::<Vec<_>>()));
    assert!((mean - scales.user_power()).abs() < 3.0 * se);
    assert!((scales.user_power() - 10f64.powf(0.6) / 4.0).abs() < 1e-12);
}
