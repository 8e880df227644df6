//! One line per acceptance criterion; exits non-zero when any fails.

#![allow(clippy::type_complexity)]

mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use assertgen::abstraction::{concrete_layout, deabstract, truncate_input, AbstractionConfig};
use assertgen::bugs::{
    detect_focal_extended, evaluate_bugs, BugCase, BugEvalOptions, ExecutionHooks, FocalStrategy,
    TrialCategory, TriggerTest,
};
use assertgen::corpus::{
    build_corpus, filter_pairs, scan_corpus, split_corpus, split_of, BuildOptions, BuiltCorpus,
    CorpusStats, DatasetSample, InputVariant, Split, SplitSpec, Subset, TestFocalPair, TokenForm,
};
use assertgen::eval::{align, bleu, evaluate, top_k_accuracy, type_correctness_rate, type_prf};
use assertgen::java::{parse_classes, AssertionKind, FOCAL_MARKER, PLACEHOLDER, SEPARATOR};
use assertgen::predictor::{
    AdapterConfig, Backend, Candidate, ExternalAdapter, Prediction, RetrievalIndex,
};

use common::{example_repo, sample, synthetic_repo, write, write_script};

type Outcome = (bool, String);

fn tmp() -> tempfile::TempDir {
    tempfile::tempdir().expect("temp dir")
}

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(f)
}

fn abstraction_fidelity() -> Outcome {
    const LIMIT: Duration = Duration::from_secs(10);
    let dir = tmp();
    for i in 0..20 {
        synthetic_repo(dir.path(), i);
    }
    let start = Instant::now();
    let built = single_threaded(|| {
        let scan = scan_corpus(dir.path()).unwrap();
        build_corpus(scan, &BuildOptions::default()).unwrap()
    });
    let mut ok = 0;
    for (raw, abs) in built.raw.iter().zip(&built.abstracted) {
        let dict = abs.dictionary.as_ref().unwrap();
        let (focal, test) = match raw.masked_input.iter().position(|t| t == SEPARATOR) {
            Some(i) => (Some(&raw.masked_input[..i]), &raw.masked_input[i + 1..]),
            None => (None, &raw.masked_input[..]),
        };
        let input_ok =
            deabstract(&abs.masked_input, dict).ok() == Some(concrete_layout(test, focal));
        let truth_ok =
            deabstract(&abs.truth_assertion, dict).ok().as_ref() == Some(&raw.truth_assertion);
        if input_ok && truth_ok {
            ok += 1;
        }
    }
    let elapsed = start.elapsed();
    let pairs = built.stats.kept_pairs;
    let n = built.raw.len();
    (
        pairs >= 100 && ok == n && elapsed < LIMIT,
        format!(
            "{ok}/{n} samples from {pairs} pairs round-trip, {:.2}s single-threaded (limit 10s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn worked_example() -> Outcome {
    let expected = [
        "TEST_METHOD: @ Test void METHOD_2 ( ) { char IDENT_1 = METHOD_0 ( STRING_0 ) ; <ASSERTION> }",
        "FOCAL_METHOD: char METHOD_0 ( String IDENT_0 ) { return IDENT_0 [ IDENT_0 . METHOD_1 - INT_0 ] ; }",
        "ASSERTION: ASSERT_0 ( IDENT_0 , CHAR_0 )",
    ];
    let dir = tmp();
    example_repo(dir.path());
    let built = build_corpus(scan_corpus(dir.path()).unwrap(), &BuildOptions::default()).unwrap();
    let Some(s) = built
        .abstracted
        .iter()
        .find(|s| s.input_variant == InputVariant::TestPlusFocal)
    else {
        return (false, "no test+focal sample produced".into());
    };
    let split = s
        .masked_input
        .iter()
        .position(|t| t == FOCAL_MARKER)
        .unwrap_or(s.masked_input.len());
    let actual = [
        s.masked_input[..split].join(" "),
        s.masked_input[split..].join(" "),
        format!("ASSERTION: {}", s.truth_assertion.join(" ")),
    ];
    let mut lines = Vec::new();
    let mut all = true;
    for (i, (want, got)) in expected.iter().zip(&actual).enumerate() {
        let same = *want == got;
        all &= same;
        lines.push(if same {
            format!("line {} exact", i + 1)
        } else {
            format!("line {} differs: got `{got}`", i + 1)
        });
    }
    (all, lines.join("; "))
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Decision {
    Keep(Vec<AssertionKind>),
    Constructor,
    Unparsed,
    TooLong,
    NoAssertion,
    OverCap,
}

fn filter_fixture(root: &Path) {
    let long = "x".repeat(10_050);
    write(
        &root.join("filt/src/w/Widget.java"),
        "package w;\npublic class Widget {\n  private int n;\n  public Widget(int n) { this.n = n; }\n  \
         public int size() { return n; }\n  public String name() { return \"w\" + n; }\n  \
         public void reset() { n = 0; }\n  public Object find(String k) { if (k == null) throw new IllegalStateException(); return null; }\n  \
         public boolean valid() { return n > 0; }\n  public int twice() { return 2 * n; }\n}\n",
    );
    write(
        &root.join("filt/src/w/WidgetTest.java"),
        &format!(
            "package w;\npublic class WidgetTest {{\n\
             @Test public void testSize() {{ Widget w = new Widget(3); assertEquals(3, w.size()); }}\n\
             @Test public void testName() {{ Widget w = new Widget(3); assertNotEquals(\"x\", w.name()); }}\n\
             @Test public void testValid() {{ Widget w = new Widget(3); assertTrue(w.valid()); }}\n\
             @Test public void testReset() {{ Widget w = new Widget(3); w.reset(); assertFalse(w.valid()); }}\n\
             @Test public void testFind() {{ Widget w = new Widget(3); assertNull(w.find(\"k\")); }}\n\
             @Test public void testNameNotNull() {{ Widget w = new Widget(1); assertNotNull(w.name()); }}\n\
             @Test public void testFindThrows() {{ Widget w = new Widget(1); assertThrows(IllegalStateException.class, () -> w.find(null)); }}\n\
             @Test public void testFindFails() {{ Widget w = new Widget(1); try {{ w.find(null); fail(); }} catch (IllegalStateException e) {{ }} }}\n\
             @Test public void testSizeMessage() {{ Widget w = new Widget(3); assertEquals(\"size\", 3, w.size()); }}\n\
             @Test public void testValidMessage() {{ Widget w = new Widget(3); assertTrue(\"valid\", w.valid()); assertNull(\"none\", w.find(\"k\")); }}\n\
             @Test public void testTwice() {{ Widget w = new Widget(3); assertNotEquals(\"m\", 5, w.twice()); assertEquals(6, w.twice()); }}\n\
             @Test public void testCreate() {{ Widget w = new Widget(3); assertNotNull(w); }}\n\
             @Test public void testSizeLong() {{ String s = \"{long}\"; Widget w = new Widget(s.length()); assertEquals(10050, w.size()); }}\n\
             @Test public void testSizeMany() {{ Widget w = new Widget(3); assertEquals(3, w.size()); assertEquals(3, w.size()); \
             assertEquals(3, w.size()); assertEquals(3, w.size()); assertEquals(3, w.size()); assertEquals(3, w.size()); }}\n\
             @Test public void testResetOnly() {{ Widget w = new Widget(3); w.reset(); }}\n\
             }}\n"
        ),
    );
    write(
        &root.join("filt/src/w/Broken.java"),
        "package w;\npublic class Broken {\n  public int f() { return (1; }\n}\n",
    );
    write(
        &root.join("filt/src/w/BrokenTest.java"),
        "package w;\npublic class BrokenTest {\n  @Test public void testF() { Broken b = null; assertTrue(b.f() > 0); }\n}\n",
    );
}

fn decision_of(pair: &TestFocalPair) -> Decision {
    let (kept, s) = filter_pairs(vec![pair.clone()], Subset::UpToFive, 10_000);
    if !kept.is_empty() {
        return Decision::Keep(
            s.assertion_frequency
                .iter()
                .flat_map(|(k, n)| std::iter::repeat_n(*k, *n))
                .collect(),
        );
    }
    let counters = [
        (s.constructor_dropped, Decision::Constructor),
        (s.parse_dropped, Decision::Unparsed),
        (s.length_dropped, Decision::TooLong),
        (s.no_assertion_dropped, Decision::NoAssertion),
        (s.over_cap_dropped, Decision::OverCap),
    ];
    counters
        .into_iter()
        .find(|(n, _)| *n == 1)
        .map(|(_, d)| d)
        .expect("a dropped pair increments one counter")
}

fn filter_conformance() -> Outcome {
    use AssertionKind::*;
    use Decision::*;
    let expected: BTreeMap<&str, Decision> = [
        ("testSize", Keep(vec![AssertEquals])),
        ("testName", Keep(vec![AssertNotEquals])),
        ("testValid", Keep(vec![AssertTrue])),
        ("testReset", Keep(vec![AssertFalse])),
        ("testFind", Keep(vec![AssertNull])),
        ("testNameNotNull", Keep(vec![AssertNotNull])),
        ("testFindThrows", Keep(vec![AssertThrows])),
        ("testFindFails", Keep(vec![TryCatchFail])),
        ("testSizeMessage", NoAssertion),
        ("testValidMessage", NoAssertion),
        ("testTwice", Keep(vec![AssertEquals])),
        ("testCreate", Constructor),
        ("testSizeLong", TooLong),
        ("testSizeMany", OverCap),
        ("testResetOnly", NoAssertion),
        ("testF", Unparsed),
    ]
    .into_iter()
    .collect();
    let expected_stats = CorpusStats {
        input_pairs: 16,
        constructor_dropped: 1,
        parse_dropped: 1,
        length_dropped: 1,
        no_assertion_dropped: 3,
        over_cap_dropped: 1,
        kept_pairs: 9,
        exploded_samples: 9,
        unparseable_files: 1,
        assertion_frequency: [
            (AssertEquals, 2),
            (AssertNotEquals, 1),
            (AssertTrue, 1),
            (AssertFalse, 1),
            (AssertNull, 1),
            (AssertNotNull, 1),
            (AssertThrows, 1),
            (TryCatchFail, 1),
        ]
        .into_iter()
        .collect(),
    };

    let dir = tmp();
    filter_fixture(dir.path());
    let scan = scan_corpus(dir.path()).unwrap();
    let actual: BTreeMap<String, Decision> = scan
        .pairs
        .iter()
        .map(|p| (p.test.name.clone(), decision_of(p)))
        .collect();
    let mut wrong: Vec<String> = expected
        .iter()
        .filter(|(name, want)| actual.get(**name) != Some(want))
        .map(|(name, want)| format!("{name}: want {want:?}, got {:?}", actual.get(*name)))
        .collect();
    if actual.len() != expected.len() {
        wrong.push(format!(
            "{} pairs scanned, {} expected",
            actual.len(),
            expected.len()
        ));
    }
    let built = build_corpus(scan, &BuildOptions::default()).unwrap();
    let stats_ok = built.stats == expected_stats && built.stats.is_conserved();
    if !stats_ok {
        wrong.push(format!("stats {:?}", built.stats));
    }
    let pass = wrong.is_empty();
    let detail = if pass {
        "16 pairs: 9 kept over all 8 kinds, drops constructor/parse/length/no-assertion/over-cap = 1/1/1/3/1, conserved"
            .to_string()
    } else {
        wrong.join("; ")
    };
    (pass, detail)
}

fn split_leak_freedom() -> Outcome {
    const GROUPS: usize = 10_000;
    let mut samples = Vec::new();
    for g in 0..GROUPS {
        for j in 0..=(g % 3) {
            let mut s = sample(
                &format!("s{g}.{j}"),
                "void t ( ) { <ASSERTION> }",
                "assertTrue ( x ) ;",
                AssertionKind::AssertTrue,
            );
            s.group_key = format!("repo{}:p.C{g}.m()", g % 17);
            samples.push(s);
        }
    }
    let spec = SplitSpec::default();
    let (train, val, test) = split_corpus(samples.clone(), &spec).unwrap();
    let groups = |v: &[DatasetSample]| {
        v.iter()
            .map(|s| s.group_key.clone())
            .collect::<BTreeSet<_>>()
    };
    let (gt, gv, gs) = (groups(&train), groups(&val), groups(&test));
    let overlap =
        gt.intersection(&gv).count() + gt.intersection(&gs).count() + gv.intersection(&gs).count();
    let fractions = [gt.len(), gv.len(), gs.len()].map(|n| n as f64 / GROUPS as f64);
    let within = fractions
        .iter()
        .zip([0.8, 0.1, 0.1])
        .all(|(f, want)| (f - want).abs() <= 0.02);

    let built = BuiltCorpus {
        stats: CorpusStats::default(),
        raw: samples.clone(),
        abstracted: samples,
    };
    let (a, b) = (tmp(), tmp());
    let files_a = built.write(a.path(), &spec).unwrap();
    built.write(b.path(), &spec).unwrap();
    let identical = files_a.iter().all(|f| {
        let name = f.file_name().unwrap();
        fs::read(f).unwrap() == fs::read(b.path().join(name)).unwrap()
    });
    let reseeded = SplitSpec {
        seed: 1,
        ..spec.clone()
    };
    let moved = gt
        .iter()
        .filter(|g| split_of(g, &reseeded) != Split::Train)
        .count();
    (
        overlap == 0 && within && identical && moved > 0,
        format!(
            "{GROUPS} groups, overlap {overlap}, fractions {:.4}/{:.4}/{:.4} (tolerance 0.02), {} files byte-identical: {identical}",
            fractions[0],
            fractions[1],
            fractions[2],
            files_a.len()
        ),
    )
}

/// Clipped n-gram matches by greedy pairing of reference positions.
fn clipped_matches(cand: &[&str], reference: &[&str], n: usize) -> (usize, usize) {
    if cand.len() < n {
        return (0, 0);
    }
    let ref_grams: Vec<&[&str]> = if reference.len() >= n {
        reference.windows(n).collect()
    } else {
        Vec::new()
    };
    let mut used = vec![false; ref_grams.len()];
    let mut hits = 0;
    for g in cand.windows(n) {
        if let Some(i) = (0..ref_grams.len()).find(|&i| !used[i] && ref_grams[i] == g) {
            used[i] = true;
            hits += 1;
        }
    }
    (hits, cand.len() - n + 1)
}

fn oracle_bleu(pairs: &[(&str, &str)]) -> f64 {
    let mut m = [0usize; 4];
    let mut t = [0usize; 4];
    let (mut c, mut r) = (0usize, 0usize);
    for (cand, reference) in pairs {
        let cand: Vec<&str> = cand.split_whitespace().collect();
        let reference: Vec<&str> = reference.split_whitespace().collect();
        c += cand.len();
        r += reference.len();
        for n in 1..=4 {
            let (h, total) = clipped_matches(&cand, &reference, n);
            m[n - 1] += h;
            t[n - 1] += total;
        }
    }
    if c == 0 || m[0] == 0 {
        return 0.0;
    }
    let p = [
        m[0] as f64 / t[0] as f64,
        (m[1] + 1) as f64 / (t[1] + 1) as f64,
        (m[2] + 1) as f64 / (t[2] + 1) as f64,
        (m[3] + 1) as f64 / (t[3] + 1) as f64,
    ];
    let bp = if c > r {
        1.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    };
    bp * (p[0] * p[1] * p[2] * p[3]).powf(0.25)
}

const BLEU_PAIRS: [(&str, &str); 22] = [
    ("assertEquals ( 1 , x ) ;", "assertEquals ( 1 , x ) ;"),
    ("assertEquals ( 2 , x ) ;", "assertEquals ( 1 , x ) ;"),
    ("assertTrue ( a ) ;", "assertFalse ( a ) ;"),
    (
        "assertNull ( m . get ( k ) ) ;",
        "assertNull ( m . get ( key ) ) ;",
    ),
    (
        "assertNotNull ( r ) ;",
        "assertNotNull ( result . value ( ) ) ;",
    ),
    (
        "assertEquals ( \"a\" , s ) ;",
        "assertEquals ( s , \"a\" ) ;",
    ),
    ("assertEquals", "assertEquals ( 0 , n ) ;"),
    ("x x x x x x", "x"),
    ("a b c d", "e f g h"),
    (
        "assertThrows ( E . class , ( ) -> f ( ) ) ;",
        "assertThrows ( E . class , ( ) -> g ( ) ) ;",
    ),
    (
        "assertTrue ( list . isEmpty ( ) ) ;",
        "assertFalse ( list . isEmpty ( ) ) ;",
    ),
    (
        "assertEquals ( a , b ) ; assertEquals ( a , b ) ;",
        "assertEquals ( a , b ) ;",
    ),
    ("( ( ( (", "( ( ( ( ( ( ( ("),
    ("assertNotEquals ( 0 , h ) ;", "assertNotEquals ( 0 , h )"),
    (
        "try { f ( ) ; fail ( ) ; } catch ( E e ) { }",
        "try { f ( ) ; fail ( ) ; } catch ( IOException e ) { }",
    ),
    (
        "assertEquals ( 3 . 0 , d , 0 . 1 ) ;",
        "assertEquals ( 3 . 0 , d ) ;",
    ),
    ("y", "y"),
    ("y z", "z y"),
    ("assertTrue ( x > 0 ) ;", "assertTrue ( x >= 0 ) ;"),
    ("assertEquals ( 'c' , ch ) ;", "assertEquals ( ch , 'c' ) ;"),
    (
        "assertNull ( a ) ; assertNull ( b ) ;",
        "assertNull ( b ) ; assertNull ( a ) ;",
    ),
    ("q r s t u v w", "t u v w q r s"),
];

fn toks(s: &str) -> Vec<&str> {
    s.split_whitespace().collect()
}

struct Fixture {
    samples: Vec<DatasetSample>,
    predictions: Vec<Prediction>,
    /// 1-based rank of the first exact candidate, by construction.
    hit: Vec<Option<usize>>,
    /// Kind of the rank-1 candidate, by construction.
    rank1_kind: Vec<Option<AssertionKind>>,
}

fn assertion_text(kind: AssertionKind, a: usize) -> String {
    match kind {
        AssertionKind::AssertEquals => format!("assertEquals({a}, x.get());"),
        AssertionKind::AssertNotEquals => format!("assertNotEquals({a}, y);"),
        AssertionKind::AssertTrue => format!("assertTrue(x.has({a}));"),
        AssertionKind::AssertFalse => format!("assertFalse(x.has({a}));"),
        AssertionKind::AssertNull => format!("assertNull(m.get({a}));"),
        AssertionKind::AssertNotNull => format!("assertNotNull(m.get({a}));"),
        AssertionKind::AssertThrows => format!("assertThrows(E.class, () -> f({a}));"),
        AssertionKind::TryCatchFail => format!("try {{ f({a}); fail(); }} catch (E e) {{ }}"),
    }
}

fn metric_fixture(seed: u64, n: usize) -> Fixture {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut fx = Fixture {
        samples: Vec::new(),
        predictions: Vec::new(),
        hit: Vec::new(),
        rank1_kind: Vec::new(),
    };
    for i in 0..n {
        let kind = AssertionKind::ALL[rng.gen_range(0..AssertionKind::ALL.len())];
        let arg = 1000 + i;
        let truth = assertion_text(kind, arg);
        let id = format!("m{i}");
        fx.samples
            .push(sample(&id, "void t ( ) { <ASSERTION> }", &truth, kind));
        let mut candidates = Vec::new();
        let mut hit = None;
        let mut first_kind = None;
        for rank in 1..=10 {
            let (text, k) = match rng.gen_range(0..10) {
                0 | 1 => {
                    if hit.is_none() {
                        hit = Some(rank);
                    }
                    let spaced = truth.replace('(', " ( ").replace(')', " ) ");
                    let text = match rng.gen_range(0..3) {
                        0 => truth.clone(),
                        1 => spaced,
                        _ => truth.trim_end_matches(';').to_string(),
                    };
                    (text, Some(kind))
                }
                2..=4 => (assertion_text(kind, arg + 1 + rank), Some(kind)),
                5..=8 => {
                    let other = AssertionKind::ALL[rng.gen_range(0..AssertionKind::ALL.len())];
                    (assertion_text(other, arg + 20 + rank), Some(other))
                }
                _ => (format!("helper({rank}) + x"), None),
            };
            if rank == 1 {
                first_kind = k;
            }
            candidates.push(Candidate::new(text, 1.0 / rank as f64));
        }
        fx.predictions.push(Prediction {
            sample_id: id,
            candidates,
            backend: "fixture".into(),
            dropped: Vec::new(),
        });
        fx.hit.push(hit);
        fx.rank1_kind.push(first_kind);
    }
    fx
}

fn oracle_topk(fx: &Fixture, k: usize) -> f64 {
    fx.hit.iter().filter(|h| h.is_some_and(|r| r <= k)).count() as f64 / fx.hit.len() as f64
}

/// (per kind precision, recall, f1), macro (p, r, f1) over kinds with truth
/// support.
fn oracle_prf(fx: &Fixture) -> (BTreeMap<AssertionKind, (f64, f64, f64)>, (f64, f64, f64)) {
    let mut per = BTreeMap::new();
    let mut macro_sum = (0.0, 0.0, 0.0);
    let mut supported = 0;
    for kind in AssertionKind::ALL {
        let mut tp = 0.0;
        let mut fp = 0.0;
        let mut fn_ = 0.0;
        for (s, pred) in fx.samples.iter().zip(&fx.rank1_kind) {
            let truth = s.assertion_kind == kind;
            let predicted = *pred == Some(kind);
            match (truth, predicted) {
                (true, true) => tp += 1.0,
                (false, true) => fp += 1.0,
                (true, false) => fn_ += 1.0,
                _ => {}
            }
        }
        if tp + fp + fn_ == 0.0 {
            continue;
        }
        let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let r = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        let f = if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        };
        per.insert(kind, (p, r, f));
        if tp + fn_ > 0.0 {
            supported += 1;
            macro_sum = (macro_sum.0 + p, macro_sum.1 + r, macro_sum.2 + f);
        }
    }
    let d = supported as f64;
    (per, (macro_sum.0 / d, macro_sum.1 / d, macro_sum.2 / d))
}

fn metric_oracles() -> Outcome {
    const TOL: f64 = 1e-9;
    let mut problems = Vec::new();
    for (c, r) in BLEU_PAIRS {
        let got = bleu(&[toks(c)], &[toks(r)]).unwrap();
        let want = oracle_bleu(&[(c, r)]);
        if (got - want).abs() > TOL {
            problems.push(format!("bleu({c:?}, {r:?}) = {got}, oracle {want}"));
        }
    }
    let cands: Vec<Vec<&str>> = BLEU_PAIRS.iter().map(|(c, _)| toks(c)).collect();
    let refs: Vec<Vec<&str>> = BLEU_PAIRS.iter().map(|(_, r)| toks(r)).collect();
    let corpus = bleu(&cands, &refs).unwrap();
    if (corpus - oracle_bleu(&BLEU_PAIRS)).abs() > TOL {
        problems.push(format!("corpus bleu {corpus} differs from oracle"));
    }
    let self_bleu = bleu(&refs, &refs).unwrap();
    if self_bleu != 1.0 {
        problems.push(format!("BLEU(x, x) = {self_bleu}"));
    }

    let fx = metric_fixture(7, 50);
    let scored = align(&fx.predictions, &fx.samples).unwrap();
    let acc = top_k_accuracy(&scored, &[1, 2, 3, 5, 10]).unwrap();
    for (k, v) in &acc {
        if *v != oracle_topk(&fx, *k) {
            problems.push(format!("top-{k} {v} vs recount {}", oracle_topk(&fx, *k)));
        }
    }
    let types = type_prf(&scored);
    let (per, macro_) = oracle_prf(&fx);
    let got_per: BTreeMap<AssertionKind, (f64, f64, f64)> = types
        .per_kind
        .iter()
        .map(|(k, s)| (*k, (s.precision, s.recall, s.f1)))
        .collect();
    if got_per != per {
        problems.push(format!("per-kind P/R/F1 {got_per:?} vs recount {per:?}"));
    }
    if (types.macro_precision, types.macro_recall, types.macro_f1) != macro_ {
        problems.push(format!(
            "macro {:?} vs recount {macro_:?}",
            (types.macro_precision, types.macro_recall, types.macro_f1)
        ));
    }
    let pass = problems.is_empty();
    (
        pass,
        if pass {
            format!(
                "{} BLEU pairs and corpus within 1e-9, BLEU(x,x)=1, top-k and P/R/F1 exact on 50 samples",
                BLEU_PAIRS.len()
            )
        } else {
            problems.join("; ")
        },
    )
}

fn synthetic_dataset(repos: usize) -> BuiltCorpus {
    let dir = tmp();
    for i in 0..repos {
        synthetic_repo(dir.path(), i);
    }
    build_corpus(scan_corpus(dir.path()).unwrap(), &BuildOptions::default()).unwrap()
}

fn monotonicity() -> Outcome {
    let mut fixtures: Vec<(String, Vec<Prediction>, Vec<DatasetSample>)> = (0..5)
        .map(|seed| {
            let fx = metric_fixture(seed, 50);
            (format!("random fixture {seed}"), fx.predictions, fx.samples)
        })
        .collect();
    let built = synthetic_dataset(30);
    let spec = SplitSpec::default();
    for (label, form) in [
        ("retrieval raw", TokenForm::Raw),
        ("retrieval abstract", TokenForm::Abstract),
    ] {
        let samples = if form == TokenForm::Raw {
            &built.raw
        } else {
            &built.abstracted
        };
        let (train, _, test) = split_corpus(samples.clone(), &spec).unwrap();
        let index = RetrievalIndex::build(&train);
        let preds = index.predict_batch(&test, 10).unwrap();
        fixtures.push((label.to_string(), preds, test));
    }
    let mut bad = Vec::new();
    for (label, preds, samples) in &fixtures {
        let report = evaluate(preds, samples, &[1, 5, 10]).unwrap();
        let a = &report.top_k_accuracy;
        let scored = align(preds, samples).unwrap();
        let tc = type_correctness_rate(&scored);
        if !(a[&1] <= a[&5] && a[&5] <= a[&10] && a[&1] <= tc) {
            bad.push(format!(
                "{label}: top1 {} top5 {} top10 {} type {tc}",
                a[&1], a[&5], a[&10]
            ));
        }
    }
    (
        bad.is_empty(),
        if bad.is_empty() {
            format!(
                "top-1 <= top-5 <= top-10 and top-1 <= type correctness on {} fixtures",
                fixtures.len()
            )
        } else {
            bad.join("; ")
        },
    )
}

fn oracle_jaccard(a: &[String], b: &[String]) -> f64 {
    let count = |v: &[String]| {
        let mut m: HashMap<String, usize> = HashMap::new();
        for t in v {
            *m.entry(t.clone()).or_default() += 1;
        }
        m
    };
    let (ca, cb) = (count(a), count(b));
    let keys: BTreeSet<&String> = ca.keys().chain(cb.keys()).collect();
    let (mut inter, mut union) = (0usize, 0usize);
    for k in keys {
        let (x, y) = (
            ca.get(k).copied().unwrap_or(0),
            cb.get(k).copied().unwrap_or(0),
        );
        inter += x.min(y);
        union += x.max(y);
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

fn retrieval_baseline() -> Outcome {
    let built = synthetic_dataset(20);
    let train: Vec<DatasetSample> = built
        .raw
        .iter()
        .filter(|s| s.input_variant == InputVariant::TestPlusFocal)
        .cloned()
        .collect();
    let index = RetrievalIndex::build(&train);
    let preds = index.predict_batch(&train, 1).unwrap();
    let self_top1 = evaluate(&preds, &train, &[1]).unwrap().top_k_accuracy[&1];

    let mut rng = StdRng::seed_from_u64(11);
    let vocab = ["a", "b", "c", "(", ")", ";", "x", "assertTrue"];
    let truths: Vec<String> = (0..20).map(|i| format!("assertTrue ( t{i} ) ;")).collect();
    let mut entries = Vec::new();
    for i in 0..50 {
        let len = rng.gen_range(0..12);
        let mut toks: Vec<String> = (0..len)
            .map(|_| vocab[rng.gen_range(0..vocab.len())].to_string())
            .collect();
        toks.push(PLACEHOLDER.to_string());
        let truth = truths[rng.gen_range(0..truths.len())].clone();
        let mut s = sample(
            &format!("e{i}"),
            "<ASSERTION>",
            "assertTrue ( x ) ;",
            AssertionKind::AssertTrue,
        );
        s.masked_input = toks;
        s.truth_assertion = truth.split(' ').map(String::from).collect();
        entries.push(s);
    }
    let index = RetrievalIndex::build(&entries);
    let mut mismatched = 0;
    for q in 0..50 {
        let len = rng.gen_range(0..12);
        let query: Vec<String> = (0..len)
            .map(|_| vocab[rng.gen_range(0..vocab.len())].to_string())
            .collect();
        let mut best: BTreeMap<String, f64> = BTreeMap::new();
        for e in &entries {
            let s = oracle_jaccard(&query, &e.masked_input);
            let t = e.truth_assertion.join(" ");
            let slot = best.entry(t).or_insert(s);
            if s > *slot {
                *slot = s;
            }
        }
        let mut want: Vec<(String, f64)> = best.into_iter().collect();
        want.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let got: Vec<(String, f64)> = index
            .query(&query, 50)
            .unwrap()
            .into_iter()
            .map(|c| (c.text, c.score))
            .collect();
        if got != want {
            mismatched += 1;
            eprintln!("query {q}: {got:?} != {want:?}");
        }
    }
    (
        self_top1 == 1.0 && mismatched == 0,
        format!(
            "self-retrieval top-1 {:.1}% over {} queries; exhaustive Jaccard ranking mismatches {mismatched}/50",
            100.0 * self_top1,
            train.len()
        ),
    )
}

fn truncation() -> Outcome {
    let config = AbstractionConfig::default();
    let mut rng = StdRng::seed_from_u64(3);
    let trials = 5000;
    let mut bad = 0;
    let mut longest = 0;
    for _ in 0..trials {
        let len = rng.gen_range(1..=1000);
        let pos = rng.gen_range(0..len);
        let stream: Vec<String> = (0..len)
            .map(|i| {
                if i == pos {
                    PLACEHOLDER.to_string()
                } else {
                    format!("IDENT_{}", i % 50)
                }
            })
            .collect();
        let out = truncate_input(&stream, &config).unwrap();
        longest = longest.max(out.len());
        let placeholders = out.iter().filter(|t| *t == PLACEHOLDER).count();
        if out.len() > 386 || placeholders != 1 || (len <= 386 && out != stream) {
            bad += 1;
        }
    }
    (
        bad == 0,
        format!("{trials} random streams of 1..=1000 tokens, {bad} violations, longest output {longest} (limit 386)"),
    )
}

fn bug_fixture(root: &Path, id: &str, compiles: bool, fixed: bool, buggy: bool) -> BugCase {
    let test = "package p;\npublic class CalcTest {\n  @Test public void testAdd() {\n    Calc c = new Calc();\n    assertEquals(3, c.add(1, 2));\n  }\n}\n";
    let prod =
        "package p;\npublic class Calc {\n  public int add(int a, int b) { return a + b; }\n}\n";
    let case = root.join(id);
    for (rev, passes) in [("fixed", fixed), ("buggy", buggy)] {
        let r = case.join(rev);
        write(&r.join("src/p/CalcTest.java"), test);
        write(&r.join("src/p/Calc.java"), prod);
        if passes {
            write(&r.join("PASSES"), "");
        }
        if compiles {
            write(&r.join("COMPILES"), "");
        }
    }
    BugCase {
        bug_id: id.into(),
        buggy_root: case.join("buggy"),
        fixed_root: case.join("fixed"),
        trigger_tests: vec![TriggerTest {
            test_class: "p.CalcTest".into(),
            test_method: "testAdd".into(),
            test_file: None,
            failing_line: Some(5),
            manual_focal: None,
        }],
        diff_changed_methods: vec![],
    }
}

fn bug_harness_truth_table() -> Outcome {
    let dir = tmp();
    let stubs = dir.path().join("stubs");
    let compile = write_script(&stubs.join("compile.sh"), "grep -q 'assertEquals' \"$1/src/p/CalcTest.java\" || exit 2\n[ -e \"$1/COMPILES\" ] && exit 0\necho 'error: cannot find symbol'; exit 1");
    let run = write_script(&stubs.join("test.sh"), "[ \"$2\" = p.CalcTest ] && [ \"$3\" = testAdd ] || exit 2\n[ -e \"$1/PASSES\" ] && exit 0\necho 'AssertionError'; exit 1");
    let hooks = ExecutionHooks {
        compile_command: format!("{} {{root}}", compile.display()),
        test_command: format!("{} {{root}} {{test_class}} {{test_method}}", run.display()),
        timeout: Duration::from_secs(30),
    };
    let mut cases = Vec::new();
    let mut expected = BTreeMap::new();
    for compiles in [false, true] {
        for fixed in [false, true] {
            for buggy in [false, true] {
                let id = format!("bug-c{}-f{}-b{}", compiles as u8, fixed as u8, buggy as u8);
                let want = match (compiles, fixed, buggy) {
                    (false, _, _) => TrialCategory::NotCompilable,
                    (true, false, _) => TrialCategory::FailsOnFixed,
                    (true, true, false) => TrialCategory::FailsOnlyOnBuggy,
                    (true, true, true) => TrialCategory::PassesOnBoth,
                };
                expected.insert(id.clone(), want);
                cases.push(bug_fixture(dir.path(), &id, compiles, fixed, buggy));
            }
        }
    }
    let backend = ExternalAdapter::new(AdapterConfig {
        command: format!("{} echo-adapter", env!("CARGO_BIN_EXE_assertgen")),
        send_truth_hint: true,
        ..AdapterConfig::default()
    });
    let report = evaluate_bugs(&cases, &hooks, &backend, &BugEvalOptions::default()).unwrap();
    let got: BTreeMap<String, TrialCategory> = report
        .trials
        .iter()
        .map(|t| (t.bug_id.clone(), t.category))
        .collect();
    let labels: Vec<&str> = TrialCategory::ALL.iter().map(|c| c.label()).collect();
    let labels_ok = labels
        == [
            "not compilable",
            "fails on fixed",
            "fails only on buggy",
            "passes on both",
        ];
    let table = report.summary.to_table();
    let table_ok = labels
        .iter()
        .all(|l| table.lines().any(|row| row.starts_with(l)));
    let per_cat_ok = report.summary.per_category
        == [
            (TrialCategory::NotCompilable, 4),
            (TrialCategory::FailsOnFixed, 2),
            (TrialCategory::FailsOnlyOnBuggy, 1),
            (TrialCategory::PassesOnBoth, 1),
        ]
        .into_iter()
        .collect::<BTreeMap<_, _>>();
    let found_ok = report.summary.bugs == 8
        && report.summary.bugs_found == 1
        && report.summary.found == ["bug-c1-f1-b0"];
    let restored = cases.iter().all(|c| {
        fs::read_to_string(c.fixed_root.join("src/p/CalcTest.java"))
            .unwrap()
            .contains("assertEquals(3, c.add(1, 2))")
    });
    let pass = got == expected
        && labels_ok
        && table_ok
        && per_cat_ok
        && found_ok
        && restored
        && report.excluded.is_empty();
    (
        pass,
        format!(
            "8 (compile, fixed, buggy) combinations classified {}; per category {:?}; bugs found {}/{}; sources restored {restored}; excluded {}",
            if got == expected { "as derived" } else { "WRONGLY" },
            report.summary.per_category.values().collect::<Vec<_>>(),
            report.summary.bugs_found,
            report.summary.bugs,
            report.excluded.len()
        ),
    )
}

fn focal_detection() -> Outcome {
    let prod = parse_classes(
        "package lib;\npublic class Text {\n  public Text(String s) { }\n  public int length() { return 0; }\n  \
         public char lastChar() { return 0; }\n  public String trimAll() { return null; }\n  public Text append(String s) { return this; }\n}\n",
    )
    .unwrap();
    let method = |class: &str, body: &str| {
        parse_classes(&format!(
            "package lib;\npublic class {class} {{\n{body}\n}}\n"
        ))
        .unwrap()[0]
            .methods[0]
            .clone()
    };
    let cases: Vec<(&str, assertgen::java::MethodUnit, Vec<String>, Option<&str>, &str, FocalStrategy)> = vec![
        (
            "name match",
            method("TextTest", "@Test public void testLength() { Text t = new Text(\"ab\"); assertEquals(2, t.length()); }"),
            vec![],
            None,
            "length",
            FocalStrategy::NameMatch,
        ),
        (
            "subtoken overlap",
            method("Regression", "@Test public void testLastCharOfWord() { Text t = new Text(\"ab\"); assertEquals('b', t.lastChar()); }"),
            vec![],
            None,
            "lastChar",
            FocalStrategy::SubtokenOverlap,
        ),
        (
            "last call",
            method("Regression", "@Test public void testIssue42() { Text t = new Text(\" a \"); t.append(\"b\"); String s = t.trimAll(); assertEquals(\"ab\", s); }"),
            vec![],
            None,
            "trimAll",
            FocalStrategy::LastCall,
        ),
        (
            "diff fallback",
            method("Regression", "@Test public void testIssue7() { Object t = new Text(\"a\"); assertNotNull(t); }"),
            vec!["lib.Missing.gone".into(), "lib.Text.<init>".into()],
            None,
            "Text",
            FocalStrategy::DiffChanged,
        ),
        (
            "manual override",
            method("Regression", "@Test public void testIssue9() { Object t = new Text(\"a\"); assertNotNull(t); }"),
            vec![],
            Some("lib.Text.append"),
            "append",
            FocalStrategy::Manual,
        ),
    ];
    let mut wrong = Vec::new();
    for (label, test, diff, manual, want_name, want_strategy) in &cases {
        match detect_focal_extended(test, &prod, diff, *manual) {
            Ok((m, s)) if m.name == *want_name && s == *want_strategy => {}
            Ok((m, s)) => wrong.push(format!("{label}: got {} via {s:?}", m.name)),
            Err(e) => wrong.push(format!("{label}: {e}")),
        }
    }
    (
        wrong.is_empty(),
        if wrong.is_empty() {
            "name match, subtoken overlap, last call, diff fallback and manual override all exact"
                .into()
        } else {
            wrong.join("; ")
        },
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("abstraction fidelity", abstraction_fidelity),
        ("worked example abstraction", worked_example),
        ("filter conformance", filter_conformance),
        ("split leak-freedom", split_leak_freedom),
        ("metric oracles", metric_oracles),
        ("monotonicity", monotonicity),
        ("retrieval baseline", retrieval_baseline),
        ("truncation", truncation),
        ("bug-harness truth table", bug_harness_truth_table),
        ("focal detection", focal_detection),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let (pass, detail) = match panic::catch_unwind(AssertUnwindSafe(check)) {
            Ok(r) => r,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        if !pass {
            failed += 1;
        }
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
