//! Acceptance suite. Runs every criterion and prints one PASS/FAIL line each.
//!
//! The MovieLens-20M reproduction needs `EASE_ML20M_RATINGS=/path/to/ratings.csv`.
//! Without it that criterion is reported as FAIL (not run), since nothing was
//! verified, but it does not set the exit status. Any criterion that runs
//! and fails makes the process exit non-zero.

use std::fs::File;
use std::io::BufReader;
use std::time::{Duration, Instant};

use ease_core::data::synthetic::{generate, SyntheticConfig};
use ease_core::eval::{ndcg_at_k, recall_at_k, CosineItemItem, MetricSpec, Popularity};
use ease_core::{
    build_gram, evaluate, evaluate_split, ingest, read_records, solve, solve_with_diagnostics, split_strong, top_k,
    GramMatrix, GramMode, IngestOptions, InteractionMatrix, RankedList, Scorer, Vocab, WeightModel,
};
use ease_oracle as oracle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Outcome {
    Pass(String),
    Fail(String),
    NotRun(String),
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn random_binary(rng: &mut ChaCha8Rng, n_users: usize, n_items: usize) -> oracle::Mat {
    let density = rng.random_range(0.05..0.5);
    (0..n_users)
        .map(|_| (0..n_items).map(|_| rng.random_bool(density) as u8 as f64).collect())
        .collect()
}

fn to_matrix(x: &oracle::Mat) -> InteractionMatrix {
    let rows: Vec<Vec<u8>> = x.iter().map(|r| r.iter().map(|&v| v as u8).collect()).collect();
    InteractionMatrix::from_dense_binary(&rows).unwrap()
}

fn gram_of(x: &oracle::Mat) -> GramMatrix {
    build_gram(&to_matrix(x), GramMode::Cooccurrence).unwrap()
}

fn dense_gram(values: Vec<f64>) -> GramMatrix {
    let n = (values.len() as f64).sqrt() as usize;
    GramMatrix::from_dense(values, Vocab::range(n), 0).unwrap()
}

fn model_mat(m: &WeightModel) -> oracle::Mat {
    oracle::from_flat(m.weights(), m.n_items())
}

const LAMBDAS: [f64; 4] = [0.1, 1.0, 10.0, 100.0];

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_col, mut worst_kkt) = (0.0f64, 0.0f64);
    let mut diag_ok = true;
    for inst in 0..200 {
        let n_items = rng.random_range(2..=60);
        let n_users = rng.random_range(5..=200);
        let lambda = LAMBDAS[inst % 4];
        let x = random_binary(&mut rng, n_users, n_items);
        let g = gram_of(&x);
        let model = solve(&g, lambda).unwrap();
        let b = model_mat(&model);
        for j in 0..n_items {
            let w = oracle::ridge_column(&x, j, lambda).unwrap();
            let scale = w.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let err = (0..n_items).map(|i| (b[i][j] - w[i]).abs()).fold(0.0, f64::max);
            worst_col = worst_col.max(err / scale);
            diag_ok &= b[j][j].to_bits() == 0;
        }
        // (G + λI)B - G vanishes off the diagonal
        let gd = oracle::from_flat(g.values(), n_items);
        let gb = oracle::matmul(&gd, &b);
        let mut off = 0.0;
        for i in 0..n_items {
            for j in 0..n_items {
                if i != j {
                    let r = gb[i][j] + lambda * b[i][j] - gd[i][j];
                    off += r * r;
                }
            }
        }
        worst_kkt = worst_kkt.max(off.sqrt() / g.frobenius().max(f64::MIN_POSITIVE));
    }
    let elapsed = start.elapsed();
    check(
        worst_col <= 1e-8 && worst_kkt < 1e-8 && diag_ok && elapsed < Duration::from_secs(60),
        format!(
            "200 instances: max column rel err {worst_col:.2e} (tol 1e-8), KKT residual {worst_kkt:.2e}·‖G‖ (tol 1e-8), exact zero diagonal {diag_ok}, {:.1}s (limit 60s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_decrease = 0.0f64;
    let mut worst_gap = 0.0f64;
    for _ in 0..20 {
        let n_items = rng.random_range(3..=12);
        let n_users = rng.random_range(10..=40);
        let lambda = [1.0, 5.0, 20.0][rng.random_range(0..3)];
        let x = random_binary(&mut rng, n_users, n_items);
        let g = oracle::gram(&x);
        let b_hat = model_mat(&solve(&gram_of(&x), lambda).unwrap());
        let rate = oracle::safe_rate(&g, lambda);
        let f_hat = oracle::objective(&g, &b_hat, lambda);

        let from_hat = oracle::gd_descent(&g, lambda, 200, rate, &b_hat).unwrap();
        let min_obj = from_hat.objectives.iter().copied().fold(f64::INFINITY, f64::min);
        worst_decrease = worst_decrease.max(f_hat - min_obj);

        let from_zero = oracle::gd_descent(&g, lambda, 20_000, rate, &oracle::zeros(n_items, n_items)).unwrap();
        let f_end = *from_zero.objectives.last().unwrap();
        worst_gap = worst_gap.max((f_end - f_hat) / f_hat);
    }
    let elapsed = start.elapsed();
    check(
        worst_decrease <= 1e-9 && worst_gap <= 1e-3 && elapsed < Duration::from_secs(120),
        format!(
            "20 instances: largest objective decrease from B̂ {worst_decrease:.2e} (tol 1e-9), worst relative gap from 0 {worst_gap:.2e} (tol 1e-3), {:.1}s (limit 120s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut scale_err, mut perm_err, mut asym_err, mut big_lambda_max) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let instances = 60;
    for inst in 0..instances {
        let n = rng.random_range(2..=40);
        let n_users = rng.random_range(5..=120);
        let lambda = LAMBDAS[inst % 4];
        let x = random_binary(&mut rng, n_users, n);
        let g = gram_of(&x);
        let model = solve(&g, lambda).unwrap();

        for c in [0.5, 2.0, 10.0] {
            let scaled = dense_gram(g.values().iter().map(|v| v * c).collect());
            let m = solve(&scaled, c * lambda).unwrap();
            scale_err = scale_err.max(max_diff(m.weights(), model.weights()));
        }

        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let gp = oracle::permute_sym(&oracle::from_flat(g.values(), n), &perm);
        let mp = solve(&dense_gram(oracle::flatten(&gp)), lambda).unwrap();
        let expected = oracle::permute_sym(&model_mat(&model), &perm);
        perm_err = perm_err.max(max_diff(mp.weights(), &oracle::flatten(&expected)));

        // B_ij P_jj = B_ji P_ii with P_jj = 1 / γ̃_j
        let (_, diag) = solve_with_diagnostics(g.clone(), lambda).unwrap();
        let p: Vec<f64> = diag.gamma_tilde.iter().map(|t| 1.0 / t).collect();
        let p_scale = p.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            for j in 0..n {
                let d = (model.weight(i, j) * p[j] - model.weight(j, i) * p[i]).abs();
                asym_err = asym_err.max(d / p_scale);
            }
        }

        let huge = 1e6 * g.max_abs().max(1.0);
        let m = solve(&g, huge).unwrap();
        big_lambda_max = big_lambda_max.max(m.weights().iter().fold(0.0, |a, v| a.max(v.abs())));
    }
    check(
        scale_err <= 1e-10 && perm_err <= 1e-12 && asym_err <= 1e-12 && big_lambda_max < 1e-2,
        format!(
            "{instances} instances: scale {scale_err:.1e} (tol 1e-10), permutation {perm_err:.1e} (tol 1e-12), asymmetry {asym_err:.1e} (tol 1e-12), max|B| at λ=1e6·max G {big_lambda_max:.1e} (< 1e-2)"
        ),
    )
}

/// Metrics recomputed from the full ordering: positions of held-out items
/// give DCG and hits, the ideal DCG comes from a sorted relevance vector.
fn brute_force(order: &[u32], held: &[bool], k: usize) -> (f64, f64) {
    let rel: Vec<f64> = order.iter().map(|&i| if held[i as usize] { 1.0 } else { 0.0 }).collect();
    let n_held = held.iter().filter(|&&h| h).count();
    let hits: f64 = rel.iter().take(k).sum();
    let recall = hits / k.min(n_held) as f64;
    let dcg = |r: &[f64]| -> f64 { r.iter().take(k).enumerate().map(|(p, v)| v / ((p + 2) as f64).log2()).sum() };
    let mut ideal = rel.clone();
    ideal.sort_by(|a, b| b.total_cmp(a));
    (recall, dcg(&rel) / dcg(&ideal))
}

fn permutations(n: usize) -> Vec<Vec<u32>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, (n - 1) as u32);
            out.push(q);
        }
    }
    out
}

fn criterion_4() -> Outcome {
    let mut worst = 0.0f64;
    let mut cases = 0usize;
    for n in 1..=8usize {
        let ks: Vec<usize> = if n <= 6 { (1..=n).collect() } else { vec![1, 3, n] };
        for order in permutations(n) {
            // scores that realize this ordering
            let mut scores = vec![0.0; n];
            for (rank, &i) in order.iter().enumerate() {
                scores[i as usize] = (n - rank) as f64;
            }
            for &k in &ks {
                let ranked = RankedList {
                    user: String::new(),
                    items: top_k(&scores, &[], k),
                };
                for mask in 1u32..(1 << n) {
                    let held: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
                    let held_idx: Vec<u32> = (0..n as u32).filter(|&i| held[i as usize]).collect();
                    let (r, g) = brute_force(&order, &held, k);
                    let dr = (recall_at_k(&ranked, &held_idx, k).unwrap() - r).abs();
                    let dg = (ndcg_at_k(&ranked, &held_idx, k).unwrap() - g).abs();
                    worst = worst.max(dr).max(dg);
                    cases += 1;
                }
            }
        }
    }
    let ranked = RankedList {
        user: String::new(),
        items: vec![(4, 3.0), (7, 2.0), (1, 1.0)],
    };
    let rank2 = (ndcg_at_k(&ranked, &[7], 3).unwrap() - 1.0 / 3f64.log2()).abs();
    check(
        worst <= 1e-12 && rank2 <= 1e-12,
        format!("{cases} (ranking, held-out, k) cases: max deviation {worst:.1e}; rank-2 single hit off by {rank2:.1e} (tol 1e-12)"),
    )
}

fn ndcg100<S: Scorer + ?Sized>(scorer: &S, users: &[ease_core::EvalUser], items: &ease_core::VocabHash) -> f64 {
    evaluate(scorer, users, items, &[MetricSpec::ndcg(100)], Default::default()).unwrap()[0].mean
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let grid = [10.0, 50.0, 100.0, 200.0, 500.0, 1000.0, 2000.0, 5000.0];
    let (mut ease_sum, mut pop_sum, mut cos_sum) = (0.0, 0.0, 0.0);
    let mut lambdas = Vec::new();
    let seeds = [11u64, 12, 13];
    for &seed in &seeds {
        let cfg = SyntheticConfig {
            n_users: 5000,
            n_items: 500,
            n_clusters: 10,
            seed,
            ..SyntheticConfig::default()
        };
        let x = generate(&cfg).unwrap();
        let split = split_strong(&x, 500, 500, 0.8, seed).unwrap();
        let hash = split.item_vocab_hash();
        let gram = build_gram(&split.train, GramMode::Cooccurrence).unwrap();
        let (best_lambda, _) = grid
            .iter()
            .map(|&l| (l, ndcg100(&solve(&gram, l).unwrap(), &split.validation, &hash)))
            .fold((f64::NAN, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        lambdas.push(best_lambda);
        let metric = [MetricSpec::ndcg(100)];
        ease_sum += evaluate_split(&solve(&gram, best_lambda).unwrap(), &split, &metric).unwrap()[0].mean;
        pop_sum += evaluate_split(&Popularity::fit(&split.train), &split, &metric).unwrap()[0].mean;
        cos_sum += evaluate_split(&CosineItemItem::from_gram(&gram), &split, &metric).unwrap()[0].mean;
    }
    let k = seeds.len() as f64;
    let (ease, pop, cos) = (ease_sum / k, pop_sum / k, cos_sum / k);
    let lift = ease / pop - 1.0;
    let elapsed = start.elapsed();
    check(
        lift >= 0.30 && ease > cos && elapsed < Duration::from_secs(60),
        format!(
            "NDCG@100 over 3 seeds: EASE {ease:.4} (λ {lambdas:?}), popularity {pop:.4}, cosine {cos:.4}; lift over popularity {:.1}% (need ≥30%), margin over cosine {:+.4} (need > 0), {:.1}s (limit 60s)",
            100.0 * lift,
            ease - cos,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_6() -> Outcome {
    let Ok(path) = std::env::var("EASE_ML20M_RATINGS") else {
        return Outcome::NotRun("set EASE_ML20M_RATINGS to the MovieLens-20M ratings.csv to run".into());
    };
    let file = match File::open(&path) {
        Ok(f) => f,
        Err(e) => return Outcome::Fail(format!("cannot open {path}: {e}")),
    };
    // ratings above 3.5 (half-star scale, so 4 and up), users with at least 5 of them
    let opts = IngestOptions {
        min_user_activity: 5,
        min_item_activity: 0,
        binarize: true,
        value_threshold: 4.0,
    };
    let x = ingest(read_records(BufReader::new(file), Some(',')), &opts).unwrap();
    let split = split_strong(&x, 10_000, 10_000, 0.8, 98765).unwrap();
    let gram = build_gram(&split.train, GramMode::Cooccurrence).unwrap();
    let (model, diag) = solve_with_diagnostics(gram, 500.0).unwrap();
    let metrics = MetricSpec::parse_list("recall@20,recall@50,ndcg@100").unwrap();
    let full = evaluate_split(&model, &split, &metrics).unwrap();
    let clamped = evaluate_split(&model.clamp_nonneg(), &split, &metrics).unwrap();
    let (r20, n100) = (full[0].mean, full[2].mean);
    let ok = (r20 - 0.391).abs() <= 0.005
        && (n100 - 0.420).abs() <= 0.005
        && clamped[2].mean < n100
        && (0.55..=0.65).contains(&diag.negative_fraction);
    check(
        ok,
        format!(
            "ML-20M λ=500: Recall@20 {r20:.4} (0.391±0.005), NDCG@100 {n100:.4} (0.420±0.005), clamped NDCG@100 {:.4} (must drop), negative fraction {:.3} (0.55–0.65)",
            clamped[2].mean, diag.negative_fraction
        ),
    )
}

fn spd_gram(n: usize, n_users: usize, seed: u64) -> GramMatrix {
    let cfg = SyntheticConfig {
        n_users,
        n_items: n,
        n_clusters: 10,
        min_items_per_user: 20,
        max_items_per_user: 80,
        seed,
        ..SyntheticConfig::default()
    };
    build_gram(&generate(&cfg).unwrap(), GramMode::Cooccurrence).unwrap()
}

fn time_once(g: &GramMatrix) -> f64 {
    let g = g.clone();
    let t = Instant::now();
    let m = ease_core::solve_owned(g, 100.0).unwrap();
    let s = t.elapsed().as_secs_f64();
    std::hint::black_box(m);
    s
}

// Minimum over repeats: the least noisy estimate on a shared machine.
fn time_solve(g: &GramMatrix, reps: usize) -> f64 {
    (0..reps).map(|_| time_once(g)).fold(f64::INFINITY, f64::min)
}

fn criterion_7() -> Outcome {
    let sizes = [1000usize, 2000, 4000];
    let grams: Vec<GramMatrix> = sizes.iter().map(|&n| spd_gram(n, 5000, 7)).collect();
    // first solve in the process pays for page faults and clock ramp-up
    time_once(&grams[0]);
    // Rounds over all sizes, so a burst of machine load hits every size
    // rather than all repeats of one; the minimum per size is kept.
    let mut times = vec![f64::INFINITY; sizes.len()];
    for _ in 0..3 {
        for (t, g) in times.iter_mut().zip(&grams) {
            *t = t.min(time_solve(g, if g.n_items() < 4000 { 3 } else { 1 }));
        }
    }
    let ratios = [times[1] / times[0], times[2] / times[1]];
    let (g_few, g_many) = (spd_gram(1000, 2000, 8), spd_gram(1000, 40_000, 9));
    // interleaved so drift in machine load hits both alike
    let (mut few, mut many) = (f64::INFINITY, f64::INFINITY);
    for _ in 0..15 {
        few = few.min(time_once(&g_few));
        many = many.min(time_once(&g_many));
    }
    let spread = (many / few - 1.0).abs();
    check(
        ratios.iter().all(|r| (6.0..=10.0).contains(r)) && spread <= 0.10,
        format!(
            "solve times {:.2}s/{:.2}s/{:.2}s at 1k/2k/4k items, ratios {:.2} and {:.2} (need 6–10); 1k items with 2k vs 40k users {:.3}s vs {:.3}s, {:.1}% apart (need ≤10%)",
            times[0],
            times[1],
            times[2],
            ratios[0],
            ratios[1],
            few,
            many,
            100.0 * spread
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("1 closed-form correctness", criterion_1),
        ("2 optimality", criterion_2),
        ("3 algebraic invariants", criterion_3),
        ("4 metric oracle equivalence", criterion_4),
        ("5 desk benchmark", criterion_5),
        ("6 ML-20M reproduction", criterion_6),
        ("7 performance scaling", criterion_7),
    ];
    let only: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (name, run) in criteria {
        if only.as_deref().is_some_and(|o| !name.starts_with(o)) {
            continue;
        }
        let (tag, detail) = match run() {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::NotRun(d) => ("FAIL", format!("not run: {d}")),
        };
        println!("criterion {name}: {tag} ({detail})");
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
