use avparse::bundle::CategoryVocabulary;
use avparse::fusion::fuse;
use avparse::label_shift::ThresholdState;
use avparse::metrics::{event_f1, segment_f1, spans_from_matrix, MIOU_THRESHOLD};
use avparse::parser::{extract_candidates, refine_candidates, run_pipeline, EventCandidate};
use avparse::{select_categories, EngineConfig, Modality, ScoreBundle, SelectedCategories};
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

const CASES: u32 = 1000;

fn runner() -> TestRunner {
    let config = Config { cases: CASES, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn vocab(c: usize) -> CategoryVocabulary {
    CategoryVocabulary::from_ids((0..c).map(|i| format!("c{i}"))).unwrap()
}

fn matrix<T: std::fmt::Debug + Clone + 'static>(
    t: usize,
    c: usize,
    cell: impl Strategy<Value = T> + Clone,
) -> impl Strategy<Value = Array2<T>> {
    proptest::collection::vec(cell, t * c).prop_map(move |v| Array2::from_shape_vec((t, c), v).unwrap())
}

fn bools(max_t: usize, max_c: usize) -> impl Strategy<Value = Array2<bool>> {
    (1..=max_t, 1..=max_c).prop_flat_map(|(t, c)| matrix(t, c, any::<bool>()))
}

fn bundle() -> impl Strategy<Value = ScoreBundle> {
    (1..=12usize, 1..=6usize).prop_flat_map(|(t, c)| {
        (matrix(t, c, -6.0..6.0f64), matrix(t, c, -6.0..6.0f64), proptest::option::of(matrix(t, 4, -1.0..1.0f64))).prop_map(
            move |(a, v, f)| {
                let b = ScoreBundle::new("p", vocab(c), a, v).unwrap();
                match f {
                    Some(mut f) => {
                        for mut row in f.rows_mut() {
                            if row.dot(&row) < 1e-6 {
                                row[0] = 1.0;
                            }
                        }
                        b.with_features(f).unwrap()
                    }
                    None => b,
                }
            },
        )
    })
}

type Check = Result<(), TestCaseError>;
type Property = (&'static str, fn() -> Result<(), String>);

fn fusion() -> Result<(), String> {
    let s = (1..=10usize, 1..=8usize)
        .prop_flat_map(|(t, c)| (matrix(t, c, 0.0..=1.0f64), matrix(t, c, 0.0..=1.0f64), 0.0..=1.0f64));
    runner()
        .run(&s, |(a, v, alpha)| -> Check {
            let f = fuse(&a, &v, alpha).unwrap();
            for ((x, y), z) in a.iter().zip(v.iter()).zip(f.iter()) {
                let slack = 4.0 * f64::EPSILON;
                prop_assert!(*z >= x.min(*y) - slack && *z <= x.max(*y) + slack, "{z} outside [{x}, {y}]");
            }
            prop_assert_eq!(fuse(&a, &v, 1.0).unwrap(), a.clone());
            prop_assert_eq!(fuse(&a, &v, 0.0).unwrap(), v.clone());
            Ok(())
        })
        .map_err(|e| format!("fusion: {e}"))
}

fn selection() -> Result<(), String> {
    let s = (1..=12usize).prop_flat_map(|c| (proptest::collection::vec(0.0..=1.0f64, c), 0.0..=1.0f64, 0.0..=1.0f64));
    runner()
        .run(&s, |(scores, a, b)| -> Check {
            let v = vocab(scores.len());
            let scores = Array1::from(scores);
            let (lo, hi) = (a.min(b), a.max(b));
            let loose = select_categories(&scores, lo, &v);
            let tight = select_categories(&scores, hi, &v);
            prop_assert!(tight.indices().iter().all(|i| loose.indices().contains(i)));
            Ok(())
        })
        .map_err(|e| format!("selection: {e}"))
}

fn clamping() -> Result<(), String> {
    let s = (bundle(), 0.0..0.5f64, 0.5..=1.0f64, 0.05..=1.0f64, 0.0..5.0f64, any::<[bool; 4]>());
    runner()
        .run(&s, |(b, lo, hi, tau0, lambda, t)| -> Check {
            let mut config = EngineConfig { tau0, lambda, threshold_clamp: [lo, hi], ..EngineConfig::default() };
            config.toggles.use_cosine_scale = t[0];
            config.toggles.use_class_selection = t[1];
            config.toggles.use_refinement = t[2];
            config.toggles.use_dynamic_thresholds = t[3];
            config.validate().map_err(|e| TestCaseError::reject(e.to_string()))?;
            for m in Modality::ALL {
                let run = run_pipeline(&b, m, &config).unwrap();
                for step in run.trace.iter().filter(|s| s.confusion.is_some()) {
                    prop_assert!(step.tau_after.iter().all(|&x| lo <= x && x <= hi), "t={} tau {}", step.t, step.tau_after);
                }
            }
            Ok(())
        })
        .map_err(|e| format!("clamping: {e}"))
}

fn running_counts() -> Result<(), String> {
    let s = (1..=12usize, 1..=6usize)
        .prop_flat_map(|(t, k)| (matrix(t, k, 0.0..=1.0f64), matrix(t, 3, -1.0..1.0f64), 0.1..=1.0f64, 0.0..5.0f64));
    runner()
        .run(&s, |(scores, features, tau0, lambda)| -> Check {
            let k = scores.ncols();
            let config = EngineConfig { tau0, lambda, ..EngineConfig::default() };
            let mut state = ThresholdState::new(SelectedCategories::all(&vocab(k)), &config);
            let mut sums = Array1::<u64>::zeros(k);
            for (t, row) in scores.rows().into_iter().enumerate() {
                prop_assert_eq!(state.counts(), &sums);
                let f = features.row(t);
                let f = if f.dot(&f) > 1e-9 { Some(f) } else { None };
                let trace = state.step(row, f, &config).unwrap();
                for (s, &d) in sums.iter_mut().zip(trace.decisions.iter()) {
                    *s += u64::from(d);
                }
            }
            prop_assert_eq!(state.counts(), &sums);
            Ok(())
        })
        .map_err(|e| format!("running counts: {e}"))
}

fn candidates() -> Result<(), String> {
    runner()
        .run(&bools(16, 5), |d| -> Check {
            let (t, k) = d.dim();
            let selected = SelectedCategories::all(&vocab(k));
            let found: Vec<EventCandidate<f64>> = extract_candidates(d.view(), &selected, Modality::Audio);
            let mut covered = Array2::from_elem((t, k), false);
            for (i, c) in found.iter().enumerate() {
                let col = c.category_index;
                prop_assert!(1 <= c.start && c.start <= c.end && c.end <= t);
                prop_assert!(c.start == 1 || !d[[c.start - 2, col]], "not maximal on the left");
                prop_assert!(c.end == t || !d[[c.end, col]], "not maximal on the right");
                for r in c.start - 1..c.end {
                    prop_assert!(!covered[[r, col]], "overlap");
                    covered[[r, col]] = true;
                }
                if let Some(next) = found.get(i + 1) {
                    prop_assert!((c.category_index, c.start) < (next.category_index, next.start), "order");
                    if next.category_index == col {
                        prop_assert!(next.start >= c.end + 2, "adjacent runs");
                    }
                }
            }
            prop_assert_eq!(covered, d);
            Ok(())
        })
        .map_err(|e| format!("candidates: {e}"))
}

fn is_subsequence(small: &[EventCandidate<f64>], big: &[EventCandidate<f64>]) -> bool {
    let mut it = big.iter();
    small.iter().all(|s| it.any(|b| b == s))
}

fn refinement() -> Result<(), String> {
    let s = (bundle(), 0.0..1.0f64, 0.0..1.0f64, 0.3..0.9f64);
    runner()
        .run(&s, |(b, x, y, tau0)| -> Check {
            let base = EngineConfig { tau0, ..EngineConfig::default() };
            for m in Modality::ALL {
                let run = run_pipeline(&b, m, &base).unwrap();
                let keep = |tau_r: f64| refine_candidates(&run.candidates, &b, m, &EngineConfig { tau_r, ..base.clone() }).unwrap();
                let (loose, tight) = (keep(x.min(y)), keep(x.max(y)));
                prop_assert!(is_subsequence(&loose, &run.candidates));
                prop_assert!(is_subsequence(&tight, &loose));
            }
            Ok(())
        })
        .map_err(|e| format!("refinement: {e}"))
}

fn metrics() -> Result<(), String> {
    let s = (1..=12usize, 1..=6usize).prop_flat_map(|(t, c)| (matrix(t, c, any::<bool>()), matrix(t, c, any::<bool>())));
    runner()
        .run(&s, |(p, g)| -> Check {
            let seg = segment_f1(p.view(), g.view()).unwrap();
            prop_assert!((0.0..=1.0).contains(&seg));
            prop_assert_eq!(seg, segment_f1(g.view(), p.view()).unwrap());
            prop_assert_eq!(segment_f1(g.view(), g.view()).unwrap(), 1.0);
            let (ps, gs) = (spans_from_matrix(p.view()), spans_from_matrix(g.view()));
            let evt = event_f1(&ps, &gs, MIOU_THRESHOLD);
            prop_assert!((0.0..=1.0).contains(&evt));
            prop_assert_eq!(evt, event_f1(&gs, &ps, MIOU_THRESHOLD));
            prop_assert_eq!(event_f1(&gs, &gs, MIOU_THRESHOLD), 1.0);
            Ok(())
        })
        .map_err(|e| format!("metrics: {e}"))
}

pub fn run() -> Result<String, String> {
    let props: [Property; 7] = [
        ("fusion", fusion),
        ("selection", selection),
        ("clamping", clamping),
        ("running counts", running_counts),
        ("candidates", candidates),
        ("refinement", refinement),
        ("metrics", metrics),
    ];
    let errors: Vec<String> = props.iter().filter_map(|(_, p)| p().err()).collect();
    if errors.is_empty() {
        let names: Vec<&str> = props.iter().map(|(n, _)| *n).collect();
        Ok(format!("{} properties x {CASES} cases ({})", props.len(), names.join(", ")))
    } else {
        Err(errors.join("; "))
    }
}
