use std::path::PathBuf;

use ashbm::analysis::TraceRecord;
use ashbm::solvers::{SolverId, ZetaSchedule};
use ashbm::SchemeSpec;
use ashbm_cli::{io, ExperimentConfig, OutputFormat, ProblemSource};
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![any::<f64>().prop_filter("finite", |v| v.is_finite()), 1e-300..1e300f64]
}

fn problem() -> impl Strategy<Value = ProblemSource> {
    prop_oneof![
        (1..5000usize, 1..5000usize, 1..5000usize, 1.0..1e6f64, proptest::option::of(any::<u64>()))
            .prop_map(|(m, n, rank, kappa, seed)| ProblemSource::Generate { m, n, rank, kappa, seed }),
        ("[a-z/_.]{1,20}", proptest::option::of("[a-z/_.]{1,20}")).prop_map(|(m, r)| ProblemSource::Mtx {
            matrix: PathBuf::from(m),
            rhs: r.map(PathBuf::from),
        }),
    ]
}

fn scheme() -> impl Strategy<Value = SchemeSpec> {
    prop_oneof![
        Just(SchemeSpec::Row),
        Just(SchemeSpec::Identity),
        (1..10_000usize).prop_map(SchemeSpec::Uniform),
        (1..10_000usize).prop_map(SchemeSpec::Partition),
    ]
}

fn zeta() -> impl Strategy<Value = ZetaSchedule> {
    prop_oneof![
        finite().prop_map(ZetaSchedule::Constant),
        proptest::collection::vec(finite(), 1..5).prop_map(ZetaSchedule::Sequence),
    ]
}

prop_compose! {
    fn config()(
        problem in problem(),
        sampling in scheme(),
        solver in proptest::sample::select(SolverId::ALL.to_vec()),
        trials in 0..1000usize,
        seed in any::<u64>(),
        zeta in zeta(),
        beta in finite(),
        tol in finite(),
        max_iters in any::<usize>(),
        out in proptest::option::of("[a-z/]{1,12}"),
        json in any::<bool>(),
        threads in 0..64usize,
        trace_every in 0..100usize,
        record_wall_time in any::<bool>(),
    ) -> ExperimentConfig {
        ExperimentConfig {
            problem, sampling, solver, trials, seed, zeta, beta, tol, max_iters,
            out: out.map(PathBuf::from),
            format: if json { OutputFormat::Json } else { OutputFormat::Csv },
            threads, trace_every, record_wall_time,
        }
    }
}

proptest! {
    // Round-trips the serialized form only; validation is checked elsewhere.
    #[test]
    fn config_round_trip(c in config()) {
        let back: ExperimentConfig = serde_json::from_str(&c.to_json()).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn trace_csv_round_trip(rows in proptest::collection::vec(
        (any::<usize>(), proptest::option::of(finite()), proptest::option::of(finite()), finite(), finite(), any::<u64>(), any::<bool>()),
        0..20,
    )) {
        let trace: Vec<TraceRecord> = rows
            .into_iter()
            .map(|(k, rse, residual_norm, alpha, beta, wall_nanos, moved)| TraceRecord { k, rse, residual_norm, alpha, beta, wall_nanos, moved })
            .collect();
        let text = io::trace_csv(&trace);
        let mut lines = text.lines();
        prop_assert_eq!(lines.next(), Some(io::TRACE_HEADER));
        let opt = |s: &str| if s.is_empty() { None } else { Some(s.parse::<f64>().unwrap()) };
        for (line, t) in lines.zip(&trace) {
            let f: Vec<&str> = line.split(',').collect();
            prop_assert_eq!(f.len(), 7);
            prop_assert_eq!(f[0].parse::<usize>().unwrap(), t.k);
            prop_assert_eq!(opt(f[1]), t.rse);
            prop_assert_eq!(opt(f[2]), t.residual_norm);
            prop_assert_eq!(f[3].parse::<f64>().unwrap(), t.alpha);
            prop_assert_eq!(f[4].parse::<f64>().unwrap(), t.beta);
            prop_assert_eq!(f[5].parse::<u64>().unwrap(), t.wall_nanos);
            prop_assert_eq!(f[6].parse::<bool>().unwrap(), t.moved);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn trial_traces_independent_of_pool_size(seed in any::<u64>(), threads in 2..5usize) {
        let problem = ProblemSource::Generate { m: 40, n: 10, rank: 8, kappa: 4.0, seed: Some(1) };
        let mut c = ExperimentConfig::new(problem, SchemeSpec::Partition(6), SolverId::Ashbm);
        c.trials = 5;
        c.seed = seed;
        c.max_iters = 200;
        let exp1 = ashbm_cli::Experiment::prepare(ExperimentConfig { threads: 1, ..c.clone() }).unwrap();
        let expn = ashbm_cli::Experiment::prepare(ExperimentConfig { threads, ..c }).unwrap();
        prop_assert_eq!(exp1.run(None).unwrap(), expn.run(None).unwrap());
        for i in [0, 4] {
            let a = io::trace_csv(&exp1.run_trial(i).1);
            let b = io::trace_csv(&expn.run_trial(i).1);
            prop_assert_eq!(a, b);
        }
    }
}
