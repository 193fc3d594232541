use std::collections::BTreeSet;

use fairadabn::nn::{
    batch_norm_forward, fair_adabn_forward, BatchNormParams, GroupNormState, Layer, Mode, Model, ModelConfig, NormKind,
    NormPolicy, ParamKind, DEFAULT_EPSILON, DEFAULT_MOMENTUM,
};
use fairadabn::tensor::{grad_check, Tensor};
use fairadabn::{Attr, Error};
use proptest::collection::vec;
use proptest::prelude::*;

fn both() -> BTreeSet<Attr> {
    BTreeSet::from([0, 1])
}

fn bits(t: &Tensor) -> Vec<u64> {
    t.values().iter().map(|v| v.to_bits()).collect()
}

fn rows_of(t: &Tensor, idx: &[usize]) -> Vec<u64> {
    bits(&t.select_rows(idx).unwrap())
}

#[derive(Debug, Clone)]
struct GroupBatch {
    features: usize,
    x: Vec<f64>,
    attrs: Vec<Attr>,
}

impl GroupBatch {
    fn rows(&self) -> usize {
        self.attrs.len()
    }
    fn tensor(&self) -> Tensor {
        Tensor::new(vec![self.rows(), self.features], self.x.clone()).unwrap()
    }
    fn members(&self, g: Attr) -> Vec<usize> {
        (0..self.rows()).filter(|&i| self.attrs[i] == g).collect()
    }
}

/// Batches with at least `min` rows in each group, in shuffled order.
fn group_batch(min: usize) -> impl Strategy<Value = GroupBatch> {
    (min..min + 6, min..min + 6, 1..5usize)
        .prop_flat_map(|(n0, n1, f)| {
            let attrs = [vec![0; n0], vec![1; n1]].concat();
            (Just(f), vec(-3.0..3.0f64, (n0 + n1) * f), Just(attrs).prop_shuffle())
        })
        .prop_map(|(features, x, attrs)| GroupBatch { features, x, attrs })
}

fn small_model() -> impl Strategy<Value = ModelConfig> {
    (1..5usize, vec(1..6usize, 1..3), 2..5usize, any::<bool>(), any::<bool>()).prop_map(
        |(input_dim, hidden_dims, num_classes, residual, swap)| ModelConfig {
            input_dim,
            hidden_dims,
            num_classes,
            norm_policy: NormPolicy::FairAdaBn,
            use_residual_blocks: residual,
            swap_residual_branch_norm: swap,
            ..ModelConfig::default()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn train_mode_output_is_standardized(
        rows in 2..20usize,
        f in 1..5usize,
        scale in 0.5..10.0f64,
        raw in vec(-1.0..1.0f64, 100),
    ) {
        let x: Vec<f64> = raw.iter().cycle().take(rows * f).map(|v| v * scale).collect();
        // the bound 1 − 5ε only holds for inputs whose variance is at least 0.2
        for j in 0..f {
            let col: Vec<f64> = (0..rows).map(|i| x[i * f + j]).collect();
            let m = col.iter().sum::<f64>() / rows as f64;
            let v = col.iter().map(|c| (c - m).powi(2)).sum::<f64>() / rows as f64;
            prop_assume!(v >= 0.2);
        }
        let mut p = BatchNormParams::new(f, DEFAULT_EPSILON, DEFAULT_MOMENTUM).unwrap();
        // γ = 1, β = 0 so the output is the pre-affine value
        let y = batch_norm_forward(&Tensor::new(vec![rows, f], x).unwrap(), &mut p, Mode::Train).unwrap();
        let y = y.to_vec();
        for j in 0..f {
            let col: Vec<f64> = (0..rows).map(|i| y[i * f + j]).collect();
            let m = col.iter().sum::<f64>() / rows as f64;
            let v = col.iter().map(|c| (c - m).powi(2)).sum::<f64>() / rows as f64;
            prop_assert!(m.abs() < 1e-6, "mean {m}");
            prop_assert!((1.0 - 5.0 * DEFAULT_EPSILON..=1.0).contains(&v), "var {v}");
        }
    }

    #[test]
    fn adaptive_layer_isolates_groups(b in group_batch(2), bump in vec(-5.0..5.0f64, 1..8), mode_eval in any::<bool>()) {
        let mode = if mode_eval { Mode::Eval } else { Mode::Train };
        let mut state = GroupNormState::new(&both(), b.features, DEFAULT_EPSILON, DEFAULT_MOMENTUM).unwrap();
        let before = fair_adabn_forward(&b.tensor(), &b.attrs, &mut state, mode).unwrap();

        let mut moved = b.clone();
        for (k, &i) in b.members(0).iter().enumerate() {
            for j in 0..b.features {
                moved.x[i * b.features + j] += bump[(k + j) % bump.len()];
            }
        }
        let after = fair_adabn_forward(&moved.tensor(), &moved.attrs, &mut state, mode).unwrap();
        let g1 = b.members(1);
        prop_assert_eq!(rows_of(&before, &g1), rows_of(&after, &g1));
    }

    #[test]
    fn whole_adaptive_model_isolates_groups(cfg in small_model(), seed in 0..1000u64, raw in vec(-2.0..2.0f64, 200), bump in -3.0..3.0f64) {
        // a shared shortcut norm would mix the groups' statistics
        let cfg = ModelConfig { swap_residual_branch_norm: cfg.use_residual_blocks, ..cfg };
        let (n0, n1) = (3, 4);
        let attrs: Vec<Attr> = [0, 1, 1, 0, 1, 0, 1].to_vec();
        let rows = n0 + n1;
        let xs: Vec<f64> = raw.iter().take(rows * cfg.input_dim).copied().collect();
        let mut m = Model::build(&cfg, &both(), seed).unwrap();
        let before = m.forward(&Tensor::new(vec![rows, cfg.input_dim], xs.clone()).unwrap(), Some(&attrs)).unwrap();
        let mut moved = xs;
        for i in (0..rows).filter(|&i| attrs[i] == 0) {
            moved[i * cfg.input_dim] += bump;
        }
        let after = m.forward(&Tensor::new(vec![rows, cfg.input_dim], moved).unwrap(), Some(&attrs)).unwrap();
        let g1: Vec<usize> = (0..rows).filter(|&i| attrs[i] == 1).collect();
        prop_assert_eq!(rows_of(&before, &g1), rows_of(&after, &g1));
    }

    #[test]
    fn one_group_batches_match_standard_norm(b in group_batch(2), group in 0..2u8) {
        let attrs = vec![group; b.rows()];
        let mut state = GroupNormState::new(&both(), b.features, DEFAULT_EPSILON, DEFAULT_MOMENTUM).unwrap();
        let mut plain = BatchNormParams::new(b.features, DEFAULT_EPSILON, DEFAULT_MOMENTUM).unwrap();
        for mode in [Mode::Train, Mode::Train, Mode::Eval] {
            let a = fair_adabn_forward(&b.tensor(), &attrs, &mut state, mode).unwrap();
            let s = batch_norm_forward(&b.tensor(), &mut plain, mode).unwrap();
            prop_assert_eq!(bits(&a), bits(&s));
        }
        let used = &state.per_group[&group];
        prop_assert_eq!(&used.running_mean, &plain.running_mean);
        prop_assert_eq!(&used.running_var, &plain.running_var);
    }

    #[test]
    fn one_group_models_match_standard_models(cfg in small_model(), seed in 0..1000u64, raw in vec(-2.0..2.0f64, 200), group in 0..2u8) {
        let rows = 6;
        let x = Tensor::new(vec![rows, cfg.input_dim], raw[..rows * cfg.input_dim].to_vec()).unwrap();
        let attrs = vec![group; rows];
        let mut adaptive = Model::build(&cfg, &both(), seed).unwrap();
        let mut standard = Model::build(&ModelConfig { norm_policy: NormPolicy::BatchNorm, ..cfg.clone() }, &both(), seed).unwrap();
        for mode in [Mode::Train, Mode::Eval] {
            adaptive.set_mode(mode);
            standard.set_mode(mode);
            let a = adaptive.forward(&x, Some(&attrs)).unwrap();
            let s = standard.forward(&x, Some(&attrs)).unwrap();
            prop_assert_eq!(bits(&a), bits(&s));
        }
    }

    #[test]
    fn permuting_rows_permutes_outputs(b in group_batch(2), perm_seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut perm: Vec<usize> = (0..b.rows()).collect();
        perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(perm_seed));

        let mut s1 = GroupNormState::new(&both(), b.features, DEFAULT_EPSILON, DEFAULT_MOMENTUM).unwrap();
        let mut s2 = GroupNormState::new(&both(), b.features, DEFAULT_EPSILON, DEFAULT_MOMENTUM).unwrap();
        let y = fair_adabn_forward(&b.tensor(), &b.attrs, &mut s1, Mode::Train).unwrap();
        let px = b.tensor().select_rows(&perm).unwrap();
        let pa: Vec<Attr> = perm.iter().map(|&i| b.attrs[i]).collect();
        let py = fair_adabn_forward(&px, &pa, &mut s2, Mode::Train).unwrap();
        let want = y.select_rows(&perm).unwrap();
        // group statistics are summed in a different order, so allow round-off
        for (u, v) in want.values().iter().zip(py.values().iter()) {
            prop_assert!((u - v).abs() <= 1e-12 * (1.0 + u.abs()), "{u} vs {v}");
        }
    }

    #[test]
    fn normalization_gradients_match_finite_differences(b in group_batch(3), gb in vec(-1.0..1.0f64, 8), adaptive in any::<bool>()) {
        let x = Tensor::param(vec![b.rows(), b.features], b.x.clone()).unwrap();
        let weights = Tensor::new(
            vec![b.rows(), b.features],
            (1..=b.rows() * b.features).map(|i| 0.5 + (i as f64 * 0.618_033_988_749_895).fract()).collect(),
        ).unwrap();
        let mut params = vec![x.clone()];
        let state = std::cell::RefCell::new(GroupNormState::new(&both(), b.features, DEFAULT_EPSILON, DEFAULT_MOMENTUM).unwrap());
        let plain = std::cell::RefCell::new(BatchNormParams::new(b.features, DEFAULT_EPSILON, DEFAULT_MOMENTUM).unwrap());
        for (k, p) in state.borrow().per_group.values().chain([&*plain.borrow()]).enumerate() {
            p.gamma.update(|v| v.iter_mut().for_each(|g| *g = 1.0 + gb[k % gb.len()]));
            p.beta.update(|v| v.iter_mut().for_each(|g| *g = gb[(k + 3) % gb.len()]));
            params.push(p.gamma.clone());
            params.push(p.beta.clone());
        }
        let r = grad_check(
            |_| {
                let y = if adaptive {
                    fair_adabn_forward(&x, &b.attrs, &mut state.borrow_mut(), Mode::Train)?
                } else {
                    batch_norm_forward(&x, &mut plain.borrow_mut(), Mode::Train)?
                };
                // squared so the loss is not invariant to the normalization
                Ok(y.square()?.mul(&weights)?.sum())
            },
            &params,
            1e-5,
        ).unwrap();
        prop_assert!(r.max_relative_error < 1e-4, "rel err {:e}", r.max_relative_error);
    }
}

#[test]
fn no_norm_policy_builds_biased_dense_stack() {
    let cfg = ModelConfig {
        input_dim: 3,
        hidden_dims: vec![4, 5],
        num_classes: 2,
        norm_policy: NormPolicy::None,
        ..ModelConfig::default()
    };
    let m = Model::build(&cfg, &BTreeSet::new(), 0).unwrap();
    assert!(m.norm_layers().is_empty());
    assert_eq!(m.buffer_count(), 0);
    assert_eq!(m.parameter_count(), 3 * 4 + 4 + 4 * 5 + 5 + 5 * 2 + 2);
    // no attributes needed
    let x = Tensor::new(vec![1, 3], vec![0.1, 0.2, 0.3]).unwrap();
    let mut m = m;
    assert_eq!(m.forward(&x, None).unwrap().shape(), &[1, 2]);
}

#[test]
fn parameter_census_per_policy() {
    let (d, h1, h2, c) = (6, 8, 4, 3);
    let build = |policy| {
        let cfg = ModelConfig {
            input_dim: d,
            hidden_dims: vec![h1, h2],
            num_classes: c,
            norm_policy: policy,
            ..ModelConfig::default()
        };
        Model::build(&cfg, &both(), 1).unwrap()
    };
    let dense = d * h1 + h1 * h2 + h2 * c + c;
    let bn = build(NormPolicy::BatchNorm);
    assert_eq!(bn.parameter_count(), dense + 2 * (h1 + h2));
    assert_eq!(bn.buffer_count(), 2 * (h1 + h2));
    let ada = build(NormPolicy::FairAdaBn);
    assert_eq!(ada.parameter_count(), dense + 2 * 2 * (h1 + h2));
    assert_eq!(ada.buffer_count(), 2 * 2 * (h1 + h2));
    // every extra scalar is a per-group norm affine
    for p in ada.named_parameters() {
        if p.is_norm_affine() {
            assert!(p.path.contains(".group0.") || p.path.contains(".group1."), "{}", p.path);
        } else {
            assert!(matches!(p.kind, ParamKind::Weight | ParamKind::Bias));
        }
    }
}

#[test]
fn residual_layout_swaps_only_the_main_norm_by_default() {
    let mut cfg = ModelConfig {
        input_dim: 3,
        hidden_dims: vec![4, 4],
        num_classes: 2,
        norm_policy: NormPolicy::FairAdaBn,
        use_residual_blocks: true,
        ..ModelConfig::default()
    };
    let kinds = |cfg: &ModelConfig| Model::build(cfg, &both(), 0).unwrap().norm_layers();
    assert_eq!(
        kinds(&cfg),
        vec![
            ("layers.0.main_norm".to_string(), NormKind::Adaptive),
            ("layers.0.shortcut_norm".to_string(), NormKind::Standard),
            ("layers.1.main_norm".to_string(), NormKind::Adaptive),
            ("layers.1.shortcut_norm".to_string(), NormKind::Standard),
        ]
    );
    cfg.swap_residual_branch_norm = true;
    assert!(kinds(&cfg).iter().all(|(_, k)| *k == NormKind::Adaptive));
    cfg.norm_policy = NormPolicy::BatchNorm;
    assert!(kinds(&cfg).iter().all(|(_, k)| *k == NormKind::Standard));
}

#[test]
fn zero_head_gives_uniform_probabilities() {
    let cfg = ModelConfig {
        input_dim: 4,
        hidden_dims: vec![5],
        num_classes: 4,
        norm_policy: NormPolicy::FairAdaBn,
        ..ModelConfig::default()
    };
    let mut m = Model::build(&cfg, &both(), 9).unwrap();
    let Some(Layer::Dense(head)) = m.layers.last() else {
        panic!("head is not dense");
    };
    head.weight.update(|w| w.fill(0.0));
    head.bias.as_ref().unwrap().update(|b| b.fill(0.3));
    let x = Tensor::new(vec![4, 4], (0..16).map(|i| i as f64 * 0.37 - 2.0).collect()).unwrap();
    let p = m.forward(&x, Some(&[0, 1, 1, 0])).unwrap().softmax_rows().unwrap();
    assert!(p.values().iter().all(|&v| v == 0.25), "{:?}", p.to_vec());
}

#[test]
fn eval_mode_is_repeatable_and_leaves_state_alone() {
    let cfg = ModelConfig {
        input_dim: 3,
        hidden_dims: vec![6, 6],
        num_classes: 3,
        norm_policy: NormPolicy::FairAdaBn,
        use_residual_blocks: true,
        ..ModelConfig::default()
    };
    let mut m = Model::build(&cfg, &both(), 4).unwrap();
    let x = Tensor::new(vec![5, 3], (0..15).map(|i| (i as f64).sin()).collect()).unwrap();
    let attrs = [1, 0, 0, 1, 1];
    m.forward(&x, Some(&attrs)).unwrap();
    m.set_mode(Mode::Eval);
    let snapshot = m.state_dict().to_text();
    let a = m.forward(&x, Some(&attrs)).unwrap();
    let b = m.forward(&x, Some(&attrs)).unwrap();
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(m.state_dict().to_text(), snapshot);
    // a lone row is fine in eval mode
    let one = x.select_rows(&[2]).unwrap();
    assert_eq!(bits(&m.forward(&one, Some(&[0])).unwrap()), rows_of(&a, &[2]));
}

#[test]
fn adaptive_models_require_attributes() {
    let cfg = ModelConfig {
        input_dim: 2,
        hidden_dims: vec![3],
        norm_policy: NormPolicy::FairAdaBn,
        ..ModelConfig::default()
    };
    let mut m = Model::build(&cfg, &both(), 0).unwrap();
    let x = Tensor::new(vec![2, 2], vec![0.0, 1.0, 2.0, 3.0]).unwrap();
    assert!(matches!(m.forward(&x, None), Err(Error::MissingAttributes)));
    assert!(matches!(m.forward(&x, Some(&[0, 2])), Err(Error::UnknownAttribute(2))));
}
