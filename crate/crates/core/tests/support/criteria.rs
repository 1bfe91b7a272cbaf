//! One check per acceptance criterion. Each returns a short summary on
//! success and the first violation found otherwise.

use std::collections::{BTreeMap, BTreeSet};

use belieflang::boolalg::{
    count_homs_from_two, enumerate_anchors, homs_to_two, initial_arrow, preserves_structure, Anchor, Element,
};
use belieflang::cli;
use belieflang::eval::{solve_cb, solve_ck, validity, EvalError, EvalOptions, FixpointTrace, Interpreter};
use belieflang::infostruct::{belief, crisp_quotient, knowledge, quotient, InfoTriple};
use belieflang::lang::{parse_formula, parse_formula_sugared, Comparison, Declarations, Formula, Function, Group, Term};
use belieflang::model::Model;
use belieflang::prob::{cond_exp, cond_exp_exact, is_adapted, is_measurable, Omega, ProbabilityMeasure};
use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::Rng;

use super::gen::{self, rat, ModelShape};
use super::oracle::{self, Mode, PowerSet, Set};
use super::{fixture, golden_dir, load};

pub type Outcome = Result<String, String>;

pub const CRITERIA: [(&str, fn() -> Outcome); 9] = [
    ("1 boolean laws", boolean_laws),
    ("2 homs into and out of 2", homs_and_ultrafilters),
    ("3 anchoring", anchoring),
    ("4 conditional expectation", conditional_expectation),
    ("5 fixpoints", fixpoints),
    ("6 scenario fixtures", scenarios),
    ("7 parser", parser),
    ("8 knowledge without belief", knowledge_without_belief),
    ("9 classical collapse", classical_collapse),
];

fn combinations<T: Clone>(items: &[T], max: usize) -> Vec<Vec<T>> {
    let mut out = vec![Vec::new()];
    for (i, x) in items.iter().enumerate() {
        if max == 0 {
            break;
        }
        for mut rest in combinations(&items[i + 1..], max - 1) {
            rest.insert(0, x.clone());
            out.push(rest);
        }
    }
    out
}

pub fn boolean_laws() -> Outcome {
    let mut checked = 0usize;
    for n in 1..=4 {
        let alg = gen::algebra(n);
        let ps = PowerSet { n };
        let els: Vec<Element> = alg.elements().collect();
        ensure!(els.len() == 1 << n, "{n} atoms: {} elements", els.len());
        let m = |x, y| alg.meet(x, y).unwrap();
        let j = |x, y| alg.join(x, y).unwrap();
        let neg = |x| alg.complement(x).unwrap();
        let (zero, one) = (alg.zero(), alg.one());
        let set = |x| ps.from_element(x);
        for &x in &els {
            ensure!(set(neg(x)) == ps.not(&set(x)), "¬ disagrees with complement at {x:?}");
            ensure!(m(x, x) == x && j(x, x) == x, "law 1 at {x:?}");
            ensure!(j(x, zero) == x && m(x, one) == x, "law 6 at {x:?}");
            ensure!(m(x, zero) == zero && j(x, one) == one, "law 7 at {x:?}");
            ensure!(m(x, neg(x)) == zero && j(x, neg(x)) == one, "law 8 at {x:?}");
            ensure!(neg(neg(x)) == x, "law 9 at {x:?}");
            checked += 6;
            for &y in &els {
                ensure!(set(m(x, y)) == ps.meet(&set(x), &set(y)), "∧ disagrees with ∩");
                ensure!(set(j(x, y)) == ps.join(&set(x), &set(y)), "∨ disagrees with ∪");
                ensure!(m(x, y) == m(y, x) && j(x, y) == j(y, x), "law 2 at {x:?},{y:?}");
                ensure!(m(x, j(x, y)) == x && j(x, m(x, y)) == x, "law 4 at {x:?},{y:?}");
                ensure!(
                    neg(m(x, y)) == j(neg(x), neg(y)) && neg(j(x, y)) == m(neg(x), neg(y)),
                    "law 10 at {x:?},{y:?}"
                );
                let below = m(x, y) == x;
                ensure!(below == (j(x, y) == y), "order equivalence at {x:?},{y:?}");
                ensure!(below == alg.leq(x, y).unwrap(), "leq disagrees at {x:?},{y:?}");
                ensure!(below == ps.leq(&set(x), &set(y)), "order disagrees with ⊆");
                checked += 4;
                for &z in &els {
                    ensure!(
                        m(x, m(y, z)) == m(m(x, y), z) && j(x, j(y, z)) == j(j(x, y), z),
                        "law 3 at {x:?},{y:?},{z:?}"
                    );
                    ensure!(
                        m(x, j(y, z)) == j(m(x, y), m(x, z)) && j(x, m(y, z)) == m(j(x, y), j(x, z)),
                        "law 5 at {x:?},{y:?},{z:?}"
                    );
                    checked += 2;
                }
            }
        }
        for family in combinations(&els, 4) {
            let k = family.len();
            let fold_meet = family.iter().fold(ps.one(), |acc, &x| ps.meet(&acc, &set(x)));
            let fold_join = family.iter().fold(ps.zero(), |acc, &x| ps.join(&acc, &set(x)));
            ensure!(set(alg.meet_all(family.clone()).unwrap()) == fold_meet, "⋀ of {family:?}");
            ensure!(set(alg.join_all(family.clone()).unwrap()) == fold_join, "⋁ of {family:?}");
            for code in 0..3usize.pow(k as u32) {
                let (mut ii, mut jj) = (Vec::new(), Vec::new());
                let mut c = code;
                for &x in &family {
                    match c % 3 {
                        0 => ii.push(x),
                        1 => jj.push(x),
                        _ => {
                            ii.push(x);
                            jj.push(x);
                        }
                    }
                    c /= 3;
                }
                let whole_m = alg.meet_all(family.clone()).unwrap();
                let whole_j = alg.join_all(family.clone()).unwrap();
                ensure!(
                    whole_m == m(alg.meet_all(ii.clone()).unwrap(), alg.meet_all(jj.clone()).unwrap()),
                    "⋀ splitting {ii:?} ∪ {jj:?}"
                );
                ensure!(
                    whole_j == j(alg.join_all(ii).unwrap(), alg.join_all(jj).unwrap()),
                    "⋁ splitting"
                );
                checked += 2;
            }
        }
    }
    Ok(format!("{checked} identities on 1-4 atoms"))
}

pub fn homs_and_ultrafilters() -> Outcome {
    let two = PowerSet { n: 1 };
    let mut homs = 0;
    for n in 1..=4 {
        let alg = gen::algebra(n);
        let ps = PowerSet { n };
        let brute: BTreeSet<Vec<Set>> = oracle::brute_homs(&ps, &two).into_iter().collect();
        let lib: BTreeSet<Vec<Set>> = homs_to_two(&alg)
            .iter()
            .map(|h| h.table().into_iter().map(|y| two.from_element(y)).collect())
            .collect();
        ensure!(brute == lib, "{n} atoms: homs B→2 differ ({} brute, {} library)", brute.len(), lib.len());
        for h in homs_to_two(&alg) {
            ensure!(preserves_structure(&alg, h.target(), &h.table()), "library hom fails the conditions");
            let (mut up, mut down) = (BTreeSet::new(), BTreeSet::new());
            for x in alg.elements() {
                if h.apply(x).unwrap() == h.target().one() {
                    up.insert(x);
                } else {
                    down.insert(x);
                }
            }
            let up_sets: BTreeSet<Set> = up.iter().map(|&x| ps.from_element(x)).collect();
            let down_sets: BTreeSet<Set> = down.iter().map(|&x| ps.from_element(x)).collect();
            ensure!(ps.is_ultrafilter(&up_sets), "b⁻¹(1) is not an ultrafilter");
            ensure!(ps.is_prime_ideal(&down_sets), "b⁻¹(0) is not a prime ideal");
            ensure!(alg.is_ultrafilter(&up).unwrap(), "library rejects the ultrafilter");
            ensure!(alg.is_prime_ideal(&down).unwrap(), "library rejects the prime ideal");
            homs += 1;
        }
        if n <= 3 {
            let els: Vec<Element> = alg.elements().collect();
            for mask in 0u32..1 << els.len() {
                let subset: BTreeSet<Element> = (0..els.len()).filter(|i| mask >> i & 1 == 1).map(|i| els[i]).collect();
                let sets: BTreeSet<Set> = subset.iter().map(|&x| ps.from_element(x)).collect();
                ensure!(
                    alg.is_ultrafilter(&subset).unwrap() == ps.is_ultrafilter(&sets),
                    "ultrafilter test disagrees on {subset:?}"
                );
                ensure!(
                    alg.is_prime_ideal(&subset).unwrap() == ps.is_prime_ideal(&sets),
                    "prime ideal test disagrees on {subset:?}"
                );
            }
        }
        let from_two = oracle::brute_homs(&two, &ps);
        ensure!(from_two.len() == 1, "{n} atoms: {} homs 2→B", from_two.len());
        let bang: Vec<Set> = initial_arrow(&alg).table().into_iter().map(|y| ps.from_element(y)).collect();
        ensure!(bang == from_two[0], "initial arrow differs from the brute-force one");
        ensure!(count_homs_from_two(&alg, 5) == Ok(1), "library count of homs 2→B");
    }
    Ok(format!("{homs} homs B→2 checked, exactly one hom 2→B on each of 1-4 atoms"))
}

pub fn anchoring() -> Outcome {
    let mut rng = gen::rng(3);
    let mut cases = 0;
    while cases < 240 {
        let n = rng.gen_range(1..=3);
        let omega = Omega::numbered(n);
        let alg = gen::algebra(rng.gen_range(1..=3));
        let gens = rng.gen_range(1..=3);
        let field = gen::field(&mut rng, &omega, &alg, gens);
        let all = enumerate_anchors(&alg, 5).unwrap();
        let a2: Vec<Anchor> = all.iter().filter(|_| rng.gen_bool(0.6)).cloned().collect();
        if a2.is_empty() {
            continue;
        }
        let a1: Vec<Anchor> = a2.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect();
        if a1.is_empty() {
            continue;
        }
        let q1 = quotient(&field, &a1).unwrap();
        let q2 = quotient(&field, &a2).unwrap();
        ensure!(q1 == oracle::quotient(&field, &a1), "quotient by A1 disagrees with the definition");
        ensure!(q2 == oracle::quotient(&field, &a2), "quotient by A2 disagrees with the definition");
        ensure!(q1.is_superset(&q2), "A1 ⊆ A2 but ℱ/A1 ⊉ ℱ/A2");
        let crisp = oracle::crisp_members(&field);
        ensure!(quotient(&field, &all).unwrap() == crisp, "ℱ/𝒜 differs from the crisp members");
        ensure!(crisp_quotient(&field) == crisp, "crisp_quotient differs from the crisp members");
        for a in &all {
            let triple = InfoTriple::new(field.clone(), a.clone()).unwrap();
            let k = knowledge(&triple, 5).unwrap();
            let b = belief(&triple);
            ensure!(k.is_sub_of(&b), "knowledge ⊄ belief");
            let k_events = oracle::sigma_events(&k);
            let b_events = oracle::sigma_events(&b);
            ensure!(k_events.is_subset(&b_events), "knowledge events ⊄ belief events");
            ensure!(k_events == oracle::generated_events(n, &crisp), "knowledge σ-algebra");
            let own = oracle::quotient(&field, std::slice::from_ref(a));
            ensure!(b_events == oracle::generated_events(n, &own), "belief σ-algebra");
        }
        cases += 1;
    }
    Ok(format!("{cases} random (Ω, 𝔹, ℱ, A) cases"))
}

pub fn conditional_expectation() -> Outcome {
    const TOL: f64 = 1e-10;
    let mut rng = gen::rng(4);
    for case in 0..500 {
        let n = rng.gen_range(1..=6);
        let omega = Omega::numbered(n);
        let p = ProbabilityMeasure::from_f64(&omega, &gen::weights_f64(&mut rng, n, true)).unwrap();
        let fine = gen::partition(&mut rng, &omega);
        let coarse = gen::coarsening(&mut rng, &fine);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| v + rng.gen_range(0.0..=1.0) * (1.0 - v)).collect();
        let ex = cond_exp(&p, &fine, &x);
        ensure!(
            oracle::sup_dist(&ex, &oracle::cond_exp(p.weights(), &fine, &x)) <= TOL,
            "case {case}: differs from the definition"
        );
        let tower = oracle::sup_dist(&cond_exp(&p, &coarse, &ex), &cond_exp(&p, &coarse, &x));
        ensure!(tower <= TOL, "case {case}: tower property off by {tower:e}");
        let before: f64 = p.weights().iter().zip(&x).map(|(w, v)| w * v).sum();
        let after: f64 = p.weights().iter().zip(&ex).map(|(w, v)| w * v).sum();
        ensure!((before - after).abs() <= TOL, "case {case}: conservation off by {:e}", before - after);
        let ey = cond_exp(&p, &fine, &y);
        ensure!(ex.iter().zip(&ey).all(|(a, b)| *a <= b + TOL), "case {case}: not monotone");
        ensure!(
            ex.iter().all(|v| (-TOL..=1.0 + TOL).contains(v)),
            "case {case}: left [0,1]: {ex:?}"
        );
        ensure!(is_measurable(&ex, &fine), "case {case}: output not measurable");
        let xr: Vec<BigRational> = (0..n).map(|_| rat(rng.gen_range(0..=1000), 1000)).collect();
        let er = cond_exp_exact(&p, &fine, &xr);
        let total = |v: &[BigRational]| -> BigRational {
            p.exact_weights().iter().zip(v).map(|(w, x)| w * x).sum()
        };
        ensure!(total(&xr) == total(&er), "case {case}: exact conservation");
        ensure!(is_measurable(&er, &fine), "case {case}: exact output not measurable");
    }
    Ok("500 random instances".into())
}

fn check_trace(trace: &FixpointTrace, tol: f64) -> Result<(), String> {
    for w in trace.iterates.windows(2) {
        ensure!(
            w[1].iter().zip(&w[0]).all(|(b, a)| b <= a),
            "iterates increase: {:?} → {:?}",
            w[0],
            w[1]
        );
    }
    for w in trace.residuals.windows(2) {
        ensure!(w[1] <= w[0] + 1e-15, "residuals increase: {} → {}", w[0], w[1]);
    }
    let last = *trace.residuals.last().ok_or("empty trace")?;
    ensure!(last <= tol, "final residual {last:e} above tolerance");
    ensure!(
        trace.converged_at == Some(trace.residuals.len() - 1),
        "converged_at {:?} with {} residuals",
        trace.converged_at,
        trace.residuals.len()
    );
    Ok(())
}

const FIXPOINT_FORMULAS: [(&str, &[&str]); 7] = [
    (
        "m0",
        &[
            "CB[{j,k}](V(add1(now)) >= 9)",
            "CK[all](X(now) >= 10)",
            "CB[{i,j}](B[k](X(now) > 9))",
            "CK[{i}](CB[{j,k}](X(now) >= p))",
        ],
    ),
    ("credit", &["CB[all](V(add1(now)) >= l)", "CK[all](V(now) >= l)"]),
    ("credit_full", &["CB[all](V(add1(now)) >= l)", "CK[all](V(now) >= l)"]),
    ("knows_not_believes", &["CB[all](X(now) >= 1)", "CK[{j}](X(now) >= 1)"]),
    ("blurred", &["CB[{j}](X(now) >= 2)", "CK[{j}](X(now) >= 2)"]),
    ("minimal", &["CK[all](0 <= 0)", "CB[all](1 <= 0)"]),
    ("classical", &["CB[all](1 <= P(now))", "CK[{j}]((1 <= P(now)) | (1 <= Q(now)))"]),
];

fn check_solved(model: &Model, phi: &Formula, tol: f64) -> Result<usize, String> {
    let opts = EvalOptions::default();
    let mut interp = Interpreter::<f64>::new(model, opts).map_err(|e| e.to_string())?;
    let mut solved = 0;
    for t in 0..model.times().len() {
        let value = match interp.eval_at(phi, t) {
            Ok(v) => v,
            Err(EvalError::NotATime { .. }) => continue,
            Err(e) => return Err(format!("{phi} at {t}: {e}")),
        };
        if let Formula::CommonKnowledge(g, body) | Formula::CommonBelief(g, body) = phi {
            let mode = if matches!(phi, Formula::CommonKnowledge(..)) { Mode::Knowledge } else { Mode::Belief };
            let child = interp.eval_at(body, t).map_err(|e| e.to_string())?;
            let members: Vec<usize> = g.members().map(|a| model.agents().index_of(a).unwrap()).collect();
            let again = oracle::common_step(model, &members, t, mode, &child, &value);
            ensure!(
                oracle::sup_dist(&again, &value) <= tol,
                "{phi} at {t}: result is not a fixed point"
            );
        }
    }
    for (f, t, trace) in interp.traces() {
        check_trace(trace, tol).map_err(|e| format!("{f} at time {t}: {e}"))?;
        solved += 1;
    }
    Ok(solved)
}

fn grid_maximality(rng: &mut rand::rngs::StdRng) -> Result<usize, String> {
    let states = rng.gen_range(1..=3);
    let shape = ModelShape {
        states,
        times: 1,
        agents: 2,
        max_atoms: 2,
        dyadic: true,
    };
    let model = gen::model(rng, shape);
    let child: Vec<f64> = (0..states).map(|_| rng.gen_range(0..=4) as f64 / 4.0).collect();
    let group = gen::group(rng, &["i", "j"]);
    let members: Vec<usize> = group.members().map(|a| model.agents().index_of(a).unwrap()).collect();
    let mode = if rng.gen_bool(0.5) { Mode::Knowledge } else { Mode::Belief };
    let opts = EvalOptions::default();
    let (f, _) = match mode {
        Mode::Knowledge => solve_ck(&child, &group, &model, 0, &opts),
        Mode::Belief => solve_cb(&child, &group, &model, 0, &opts),
    }
    .map_err(|e| e.to_string())?;

    // fixed points are measurable for the join of the members' σ-algebras
    let mut classes: Vec<Vec<usize>> = Vec::new();
    let mut class_of = vec![0; states];
    for s in 0..states {
        let sig: Vec<usize> = members
            .iter()
            .map(|&i| oracle::agent_sigma(&model, i, 0, mode).block_index(s))
            .collect();
        match classes.iter().position(|c| {
            let r = c[0];
            members
                .iter()
                .map(|&i| oracle::agent_sigma(&model, i, 0, mode).block_index(r))
                .eq(sig.iter().copied())
        }) {
            Some(c) => {
                classes[c].push(s);
                class_of[s] = c;
            }
            None => {
                class_of[s] = classes.len();
                classes.push(vec![s]);
            }
        }
    }
    let k = classes.len();
    let mut found = 0;
    for code in 0..65usize.pow(k as u32) {
        let mut c = code;
        let levels: Vec<f64> = (0..k)
            .map(|_| {
                let v = (c % 65) as f64 / 64.0;
                c /= 65;
                v
            })
            .collect();
        let g: Vec<f64> = (0..states).map(|s| levels[class_of[s]]).collect();
        let image = oracle::common_step(&model, &members, 0, mode, &child, &g);
        if oracle::sup_dist(&image, &g) <= 1e-12 {
            found += 1;
            ensure!(
                g.iter().zip(&f).all(|(a, b)| *a <= b + 1e-9),
                "grid fixed point {g:?} exceeds solver result {f:?} (child {child:?})"
            );
        }
    }
    ensure!(found >= 1, "grid search found no fixed point at all");
    Ok(found)
}

pub fn fixpoints() -> Outcome {
    let tol = EvalOptions::default().tol;
    let mut solved = 0;
    for (name, formulas) in FIXPOINT_FORMULAS {
        let model = load(name);
        for src in formulas {
            let phi = parse_formula(src, &model.declarations()).map_err(|e| format!("{name}: {src}: {e}"))?;
            solved += check_solved(&model, &phi, tol).map_err(|e| format!("{name}: {e}"))?;
        }
    }
    let mut rng = gen::rng(5);
    for _ in 0..150 {
        let shape = ModelShape {
            states: rng.gen_range(1..=4),
            times: rng.gen_range(1..=3),
            agents: rng.gen_range(1..=3),
            max_atoms: 3,
            dyadic: rng.gen_bool(0.5),
        };
        let model = gen::model(&mut rng, shape);
        let names: Vec<&str> = gen::AGENT_NAMES[..shape.agents].to_vec();
        let body = gen::formula(&mut rng, 2, &names, false);
        let phi = if rng.gen_bool(0.5) {
            Formula::common_knowledge(gen::group(&mut rng, &names), body)
        } else {
            Formula::common_belief(gen::group(&mut rng, &names), body)
        };
        solved += check_solved(&model, &phi, tol)?;
    }

    let opts = EvalOptions::default();
    let m0 = load("m0");
    let everyone = Group::new(["i", "j", "k"]).unwrap();
    for solve in [solve_ck, solve_cb] {
        let (v, trace) = solve(&[1.0, 1.0], &everyone, &m0, 0, &opts).map_err(|e| e.to_string())?;
        ensure!(v == [1.0, 1.0], "constant-true fixpoint is {v:?}");
        ensure!(trace.converged_at == Some(0), "constant-true took {:?} iterations", trace.converged_at);
    }
    let full = load("credit_full");
    let credit_phi = parse_formula("CB[all](V(add1(now)) >= l)", &full.declarations()).unwrap();
    let Formula::CommonBelief(g, body) = &credit_phi else {
        return Err("credit formula is not CB".into());
    };
    let child = belieflang::eval::interpret_at(body, &full, 0, &opts).map_err(|e| e.to_string())?;
    let (v, trace) = solve_cb(&child, g, &full, 0, &opts).map_err(|e| e.to_string())?;
    ensure!(v == child, "full-information fixpoint {v:?} differs from child {child:?}");
    ensure!(trace.converged_at == Some(1), "full information took {:?}", trace.converged_at);
    let m0_phi = parse_formula("CB[{j,k}](V(add1(now)) >= 9)", &m0.declarations()).unwrap();
    let mut interp = Interpreter::<f64>::new(&m0, opts).unwrap();
    let collapse = interp.eval_at(&m0_phi, 0).map_err(|e| e.to_string())?;
    ensure!(collapse.iter().all(|v| v.abs() <= 1e-12), "credit collapse gives {collapse:?}");
    let iterations = interp.traces()[0].2.residuals.len();
    ensure!(iterations <= 50, "credit collapse took {iterations} iterations");

    let mut grid_points = 0;
    let mut rng = gen::rng(6);
    for _ in 0..30 {
        grid_points += grid_maximality(&mut rng)?;
    }
    Ok(format!(
        "{solved} traces monotone, closed forms hold, credit collapse in {iterations} iterations, {grid_points} grid fixed points all dominated"
    ))
}

pub struct Golden {
    pub name: &'static str,
    pub args: &'static [&'static str],
    pub code: i32,
}

const TRADE: &str = "(B[j](X(add1(now)) > 10)) & (B[k](X(add1(now)) < 10))";

pub const GOLDEN: [Golden; 13] = [
    Golden { name: "check_m0", args: &["check", "-m", "@m0"], code: 0 },
    Golden { name: "validity_holds", args: &["validity", "-m", "@m0", "-f", TRADE, "-i", "i", "-w", "w1", "-t", "0", "-e", "0.5"], code: 0 },
    Golden { name: "validity_fails", args: &["validity", "-m", "@m0", "-f", TRADE, "-i", "i", "-w", "w1", "-t", "0", "-e", "0.05"], code: 0 },
    Golden { name: "validity_exact", args: &["validity", "--exact", "-m", "@m0", "-f", TRADE, "-i", "i", "-w", "w2", "-t", "0", "-e", "0.5"], code: 0 },
    Golden { name: "eval_m0_credit", args: &["eval", "-m", "@m0", "-f", "CB[{j,k}](V(add1(now)) >= 9)"], code: 0 },
    Golden { name: "eval_credit", args: &["eval", "-m", "@credit", "-f", "CB[all](V(add1(now)) >= l)", "-t", "0"], code: 0 },
    Golden { name: "eval_credit_full", args: &["eval", "-m", "@credit_full", "-f", "CB[all](V(add1(now)) >= l)"], code: 0 },
    Golden { name: "eval_exact", args: &["eval", "--exact", "-m", "@blurred", "-f", "B[j](X(now) >= 2) & K[j](X(now) >= 2)"], code: 0 },
    Golden { name: "trace_credit", args: &["trace", "-m", "@credit", "-f", "CB[all](V(add1(now)) >= l)", "-t", "0"], code: 0 },
    Golden { name: "anchors_blurred", args: &["anchors", "-m", "@blurred", "-i", "j", "-t", "0"], code: 0 },
    Golden { name: "adapted_leaky", args: &["adapted", "-m", "@leaky"], code: 0 },
    Golden { name: "validity_knows_not_believes", args: &["validity", "-m", "@knows_not_believes", "-f", "K[j](X(now) >= 1) -> B[j](X(now) >= 1)", "-i", "i", "-w", "w2", "-t", "0"], code: 0 },
    Golden { name: "trace_not_converged", args: &["trace", "-m", "@credit", "-f", "CB[all](V(add1(now)) >= l)", "-t", "0", "--max-iter", "3"], code: 5 },
];

pub fn run_cli(args: &[&str]) -> (i32, String, String) {
    let argv: Vec<String> = std::iter::once("belieflang".to_string())
        .chain(args.iter().map(|a| match a.strip_prefix('@') {
            Some(name) => fixture(name).to_string_lossy().into_owned(),
            None => a.to_string(),
        }))
        .collect();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = cli::run(argv, &mut std::io::empty(), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

/// Compares every golden case with its stored output; `BELIEFLANG_BLESS=1`
/// rewrites the stored files instead.
pub fn golden() -> Result<usize, String> {
    let bless = std::env::var_os("BELIEFLANG_BLESS").is_some();
    for case in &GOLDEN {
        let (code, out, err) = run_cli(case.args);
        let (code2, out2, _) = run_cli(case.args);
        ensure!(code == code2 && out == out2, "{}: output not stable across runs", case.name);
        ensure!(code == case.code, "{}: exit {code}, expected {} ({err})", case.name, case.code);
        let path = golden_dir().join(format!("{}.out", case.name));
        if bless {
            std::fs::create_dir_all(golden_dir()).unwrap();
            std::fs::write(&path, &out).unwrap();
            continue;
        }
        let want = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        ensure!(out == want, "{}: stdout differs from golden file\n--- got\n{out}--- want\n{want}", case.name);
    }
    Ok(GOLDEN.len())
}

pub fn scenarios() -> Outcome {
    let opts = EvalOptions::default();
    let m0 = load("m0");
    let trade = parse_formula(TRADE, &m0.declarations()).map_err(|e| e.to_string())?;
    let loose = validity("i", "w1", 0, 0.5, &trade, &m0, &opts).map_err(|e| e.to_string())?;
    ensure!(loose.holds && (loose.value - 0.5).abs() <= 1e-12, "⊨_0.5 gave {loose:?}");
    let strict = validity("i", "w1", 0, 0.05, &trade, &m0, &opts).map_err(|e| e.to_string())?;
    ensure!(!strict.holds && (strict.value - 0.5).abs() <= 1e-12, "⊨_0.05 gave {strict:?}");

    let credit = load("credit");
    let cb = parse_formula("CB[all](V(add1(now)) >= l)", &credit.declarations()).unwrap();
    let collapsed = belieflang::eval::interpret_at(&cb, &credit, 0, &opts).map_err(|e| e.to_string())?;
    ensure!(collapsed.iter().all(|v| v.abs() <= 1e-12), "credit CB is {collapsed:?}");
    let full = load("credit_full");
    let solvent = full.omega().index_of("solvent").unwrap();
    let held = belieflang::eval::interpret_at(&cb, &full, 0, &opts).map_err(|e| e.to_string())?;
    ensure!(held[solvent] == 1.0, "full-information CB on the solvency state is {}", held[solvent]);

    let files = golden()?;
    Ok(format!(
        "trade v={} (0.5 holds, 0.05 fails), credit CB 0 vs 1, {files} golden outputs byte-stable",
        loose.value
    ))
}

fn parser_decls() -> Declarations {
    Declarations::new()
        .agent("i")
        .agent("j")
        .agent("k")
        .process("X")
        .process("Y")
        .process("V")
        .function("add1", Function::AddConst(rat(1, 1)))
        .function("sub", Function::Sub)
        .function("min2", Function::Min { arity: 2 })
        .function("p", Function::Const(rat(10, 1)))
        .function("l", Function::Const(rat(9, 1)))
}

pub fn parser() -> Outcome {
    let decls = parser_decls();
    let mut rng = gen::rng(7);
    let mut deepest = 0;
    for n in 0..1000 {
        let f = gen::formula(&mut rng, 6, &["i", "j", "k"], true);
        ensure!(f.depth() <= 6, "generator exceeded depth 6");
        deepest = deepest.max(f.depth());
        let text = f.to_string();
        let back = parse_formula_sugared(&text, &decls).map_err(|e| format!("#{n}: `{text}`: {e}"))?;
        ensure!(back == f, "#{n}: `{text}` reparsed as `{back}`");
    }

    let a = Term::proc("X", Term::Now);
    let b = Term::int(3);
    let leq = |x: &Term, y: &Term| Formula::leq(x.clone(), y.clone());
    let not = Formula::not;
    let and = Formula::and;
    let eq = and(leq(&a, &b), leq(&b, &a));
    let ne = not(eq.clone());
    let lt = and(leq(&a, &b), ne.clone());
    let ge = not(lt.clone());
    let gt = not(leq(&a, &b));
    let (phi, psi) = (leq(&a, &b), leq(&b, &a));
    let or = not(and(not(phi.clone()), not(psi.clone())));
    let implies = |x: &Formula, y: &Formula| not(and(not(not(x.clone())), not(y.clone())));
    let iff = and(implies(&phi, &psi), implies(&psi, &phi));
    let identities: [(Formula, &str, Formula); 8] = [
        (Formula::Compare(Comparison::Eq, a.clone(), b.clone()), "X(now) = 3", eq),
        (Formula::Compare(Comparison::Ne, a.clone(), b.clone()), "X(now) != 3", ne),
        (Formula::Compare(Comparison::Lt, a.clone(), b.clone()), "X(now) < 3", lt),
        (Formula::Compare(Comparison::Ge, a.clone(), b.clone()), "X(now) >= 3", ge),
        (Formula::Compare(Comparison::Gt, a.clone(), b.clone()), "X(now) > 3", gt),
        (Formula::or(phi.clone(), psi.clone()), "(X(now) <= 3) | (3 <= X(now))", or),
        (Formula::implies(phi.clone(), psi.clone()), "(X(now) <= 3) -> (3 <= X(now))", implies(&phi, &psi)),
        (Formula::iff(phi.clone(), psi.clone()), "(X(now) <= 3) <-> (3 <= X(now))", iff),
    ];
    for (sugar, text, core) in &identities {
        ensure!(sugar.desugar() == *core, "`{sugar}` desugars to `{}`, expected `{core}`", sugar.desugar());
        let parsed = parse_formula(text, &decls).map_err(|e| e.to_string())?;
        ensure!(parsed == *core, "`{text}` parses to `{parsed}`");
        ensure!(core.is_core() && core.desugar() == *core, "desugaring is not idempotent on `{core}`");
    }

    for text in ["(B[j](X(now) >= p)) & (B[k](X(now) <= p))", "CB[{j,k}](V(add1(now)) >= l)"] {
        let f = parse_formula_sugared(text, &decls).map_err(|e| e.to_string())?;
        let printed = f.to_string();
        let again = parse_formula_sugared(&printed, &decls).map_err(|e| e.to_string())?;
        ensure!(again == f && again.to_string() == printed, "`{text}` does not round-trip");
    }
    Ok(format!("1000 random ASTs (max depth {deepest}) round-trip, 8 identities, both example formulas"))
}

pub fn knowledge_without_belief() -> Outcome {
    let model = load("knows_not_believes");
    let phi = parse_formula("K[j](X(now) >= 1) -> B[j](X(now) >= 1)", &model.declarations()).unwrap();
    let v = validity("i", "w2", 0, 0.0, &phi, &model, &EvalOptions::default()).map_err(|e| e.to_string())?;
    ensure!(!v.holds, "K→B unexpectedly valid with v = {}", v.value);
    ensure!((v.value - 0.5).abs() <= 1e-12, "v = {}", v.value);
    Ok(format!("i, w2, 0 ⊨₀ K[j]φ → B[j]φ FAILS with v={}", v.value))
}

fn formulas_up_to(depth: usize, atoms: &[Formula]) -> Vec<Formula> {
    let mut all: Vec<Formula> = atoms.to_vec();
    for _ in 0..depth {
        let mut next = atoms.to_vec();
        for f in &all {
            next.push(Formula::not(f.clone()));
            next.push(Formula::knows("j", f.clone()));
            next.push(Formula::believes("k", f.clone()));
        }
        for f in &all {
            for g in &all {
                next.push(Formula::and(f.clone(), g.clone()));
            }
        }
        all = next;
    }
    all
}

fn random_classical(rng: &mut rand::rngs::StdRng, depth: usize, atoms: &[Formula]) -> Formula {
    if depth == 0 {
        return atoms.choose(rng).unwrap().clone();
    }
    let sub = |rng: &mut rand::rngs::StdRng| random_classical(rng, depth - 1, atoms);
    let jk = Group::new(["j", "k"]).unwrap();
    match rng.gen_range(0..9) {
        0 => Formula::not(sub(rng)),
        1 => Formula::and(sub(rng), sub(rng)),
        2 => Formula::or(sub(rng), sub(rng)),
        3 => Formula::implies(sub(rng), sub(rng)),
        4 => Formula::iff(sub(rng), sub(rng)),
        5 => Formula::knows(["j", "k"].choose(rng).unwrap(), sub(rng)),
        6 => Formula::believes(["j", "k"].choose(rng).unwrap(), sub(rng)),
        7 => Formula::common_knowledge(jk, sub(rng)),
        _ => Formula::common_belief(jk, sub(rng)),
    }
}

pub fn classical_collapse() -> Outcome {
    let model = load("classical");
    let one = Term::int(1);
    let atoms = [
        Formula::leq(one.clone(), Term::proc("P", Term::Now)),
        Formula::leq(one, Term::proc("Q", Term::Now)),
    ];
    let valuations: Vec<(bool, bool)> = model
        .omega()
        .names()
        .iter()
        .map(|s| (s.as_bytes()[0] == b't', s.as_bytes()[1] == b't'))
        .collect();
    let mut interp = Interpreter::<f64>::new(&model, EvalOptions::default()).map_err(|e| e.to_string())?;
    let mut check = |f: &Formula| -> Result<(), String> {
        let got = interp.eval_at(&f.desugar(), 0).map_err(|e| e.to_string())?;
        for (w, &(p, q)) in valuations.iter().enumerate() {
            let want = if oracle::propositional(f, p, q) { 1.0 } else { 0.0 };
            ensure!(got[w] == want, "`{f}` at {}: {} vs {want}", model.omega().name(w), got[w]);
        }
        Ok(())
    };
    let exhaustive = formulas_up_to(3, &atoms);
    for f in &exhaustive {
        check(f)?;
    }
    // one depth-3 representative per truth table, then every constructor on top
    let mut classes: BTreeMap<Vec<bool>, Formula> = BTreeMap::new();
    for f in exhaustive.iter().filter(|f| f.depth() == 3) {
        let table: Vec<bool> = valuations.iter().map(|&(p, q)| oracle::propositional(f, p, q)).collect();
        classes.entry(table).or_insert_with(|| f.clone());
    }
    let reps: Vec<&Formula> = classes.values().collect();
    let jk = Group::new(["j", "k"]).unwrap();
    let mut lifted = 0;
    for f in &reps {
        let f = (*f).clone();
        for g in [
            Formula::not(f.clone()),
            Formula::knows("j", f.clone()),
            Formula::knows("k", f.clone()),
            Formula::believes("j", f.clone()),
            Formula::believes("k", f.clone()),
            Formula::common_knowledge(jk.clone(), f.clone()),
            Formula::common_belief(jk.clone(), f.clone()),
        ] {
            check(&g)?;
            lifted += 1;
        }
        for h in &reps {
            let h = (*h).clone();
            for g in [
                Formula::and(f.clone(), h.clone()),
                Formula::or(f.clone(), h.clone()),
                Formula::implies(f.clone(), h.clone()),
                Formula::iff(f.clone(), h.clone()),
            ] {
                check(&g)?;
                lifted += 1;
            }
        }
    }
    let mut rng = gen::rng(9);
    let sampled = 20_000;
    for _ in 0..sampled {
        check(&random_classical(&mut rng, 4, &atoms))?;
    }
    Ok(format!(
        "{} formulas of depth ≤ 3 exhaustively, {lifted} depth-4 lifts of all {} truth tables, {sampled} sampled at depth 4",
        exhaustive.len(),
        classes.len()
    ))
}

/// `interpret` output is adapted to the filtration on random adapted models.
pub fn adapted_output(seed: u64) -> Result<(), String> {
    let mut rng = gen::rng(seed);
    let shape = ModelShape {
        states: rng.gen_range(1..=4),
        times: rng.gen_range(1..=3),
        agents: rng.gen_range(1..=3),
        max_atoms: 3,
        dyadic: false,
    };
    let model = gen::model(&mut rng, shape);
    let names: Vec<&str> = gen::AGENT_NAMES[..shape.agents].to_vec();
    let phi = gen::formula(&mut rng, 3, &names, true);
    match belieflang::eval::interpret(&phi, &model, &EvalOptions::default()) {
        Ok(tp) => {
            ensure!(is_adapted(tp.rows(), model.filtration()), "`{phi}` is not adapted");
            ensure!(
                tp.rows().iter().flatten().all(|v| (0.0..=1.0).contains(v)),
                "`{phi}` leaves [0,1]"
            );
            Ok(())
        }
        Err(EvalError::NotATime { .. }) => Ok(()),
        Err(e) => Err(format!("`{phi}`: {e}")),
    }
}

