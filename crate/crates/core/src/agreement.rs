//! Chance-corrected γ agreement on clip-aligned level sequences.
//!
//! Projected annotations are already aligned on clips, so only the
//! categorical dissimilarity between levels contributes (alignment weight 0,
//! categorical weight 1). For a set of annotators over the same clips:
//!
//! * the observed disorder δ(a) is the mean level dissimilarity over every
//!   (annotator pair, clip) comparison;
//! * the expected disorder δ(c) is the same quantity averaged over `n_null`
//!   random corpora, each annotator's sequence being redrawn i.i.d. from
//!   that annotator's own level distribution;
//! * γ = 1 − δ(a)/δ(c), so γ = 1 is perfect agreement and γ ≤ 0 is chance
//!   or worse.
//!
//! Dissimilarities are multiples of 0.1 and are accumulated as integer
//! tenths, which makes δ(a) exact and independent of summation order.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rayon::prelude::*;

use crate::annotation::{ClipLabel, ObjLevel};
use crate::error::{Error, Result};
use crate::seed;

/// Level dissimilarity in tenths, indexed by [`ObjLevel::index`].
const DC_TENTHS: [[u64; 4]; 4] = [[0, 3, 7, 10], [3, 0, 4, 7], [7, 4, 0, 3], [10, 7, 3, 0]];

/// Categorical dissimilarity between two levels.
pub fn d_c(u: ObjLevel, v: ObjLevel) -> f64 {
    DC_TENTHS[u.index()][v.index()] as f64 / 10.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaConfig {
    /// Alignment weight. Fixed at 0: projected annotations are pre-aligned.
    pub alpha: f64,
    /// Categorical weight. Fixed at 1.
    pub beta: f64,
    /// Number of random corpora averaged into δ(c).
    pub n_null: usize,
    pub seed: u64,
    /// A comparison is skipped when either side's level is listed here.
    pub excluded_levels: BTreeSet<ObjLevel>,
}

impl Default for GammaConfig {
    fn default() -> Self {
        GammaConfig {
            alpha: 0.0,
            beta: 1.0,
            n_null: 62,
            seed: 0,
            excluded_levels: BTreeSet::new(),
        }
    }
}

impl GammaConfig {
    pub fn with_seed(seed: u64) -> Self {
        GammaConfig {
            seed,
            ..Default::default()
        }
    }

    pub fn excluding(mut self, level: ObjLevel) -> Self {
        self.excluded_levels.insert(level);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.alpha != 0.0 || self.beta != 1.0 {
            return Err(Error::Shape(
                "only the categorical dissimilarity is supported (alpha = 0, beta = 1)".into(),
            ));
        }
        if self.n_null == 0 {
            return Err(Error::Shape("n_null must be at least 1".into()));
        }
        Ok(())
    }
}

/// Mean dissimilarity together with the number of comparisons behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disorder {
    pub value: f64,
    pub n_pairs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaResult {
    pub gamma: f64,
    pub observed_disorder: f64,
    pub expected_disorder: f64,
    pub n_pairs: usize,
}

fn check_shape(sequences: &[Vec<ObjLevel>]) -> Result<usize> {
    if sequences.len() < 2 {
        return Err(Error::FewerThanTwoAnnotators(sequences.len()));
    }
    let len = sequences[0].len();
    if let Some(bad) = sequences.iter().find(|s| s.len() != len) {
        return Err(Error::LengthMismatch {
            expected: len,
            found: bad.len(),
        });
    }
    Ok(len)
}

/// (sum of dissimilarities in tenths, comparisons made)
fn disorder_tenths<S: AsRef<[ObjLevel]>>(
    sequences: &[S],
    excluded: &BTreeSet<ObjLevel>,
) -> (u64, u64) {
    let mut sum = 0;
    let mut count = 0;
    for (i, a) in sequences.iter().enumerate() {
        for b in &sequences[i + 1..] {
            for (&u, &v) in a.as_ref().iter().zip(b.as_ref()) {
                if excluded.contains(&u) || excluded.contains(&v) {
                    continue;
                }
                sum += DC_TENTHS[u.index()][v.index()];
                count += 1;
            }
        }
    }
    (sum, count)
}

fn to_disorder((sum, count): (u64, u64)) -> Disorder {
    Disorder {
        value: if count == 0 {
            0.0
        } else {
            sum as f64 / (10.0 * count as f64)
        },
        n_pairs: count as usize,
    }
}

/// δ(a): mean dissimilarity over all annotator pairs and clips.
pub fn observed_disorder(sequences: &[Vec<ObjLevel>], cfg: &GammaConfig) -> Result<Disorder> {
    cfg.validate()?;
    check_shape(sequences)?;
    Ok(to_disorder(disorder_tenths(
        sequences,
        &cfg.excluded_levels,
    )))
}

/// δ(c): observed disorder averaged over `n_null` marginal-preserving
/// random corpora.
///
/// Annotators' level histograms are put in a canonical order before each is
/// assigned its random stream, so the result is exactly invariant under
/// renaming annotators and under reordering clips.
pub fn expected_disorder(sequences: &[Vec<ObjLevel>], cfg: &GammaConfig) -> Result<f64> {
    cfg.validate()?;
    let len = check_shape(sequences)?;
    let mut marginals: Vec<[u64; 4]> = sequences
        .iter()
        .map(|s| {
            let mut h = [0u64; 4];
            for l in s {
                h[l.index()] += 1;
            }
            h
        })
        .collect();
    marginals.sort_unstable();

    let trials: Vec<f64> = (0..cfg.n_null)
        .into_par_iter()
        .map(|trial| {
            let resampled: Vec<Vec<ObjLevel>> = marginals
                .iter()
                .enumerate()
                .map(|(k, hist)| {
                    let mut rng = seed::rng_at(cfg.seed, &[trial as u64, k as u64]);
                    (0..len)
                        .map(|_| draw_level(&mut rng, hist, len as u64))
                        .collect()
                })
                .collect();
            to_disorder(disorder_tenths(&resampled, &cfg.excluded_levels)).value
        })
        .collect();
    Ok(trials.iter().sum::<f64>() / cfg.n_null as f64)
}

fn draw_level(rng: &mut seed::Rng, hist: &[u64; 4], total: u64) -> ObjLevel {
    let mut u = rng.random_range(0..total);
    for (k, &n) in hist.iter().enumerate() {
        if u < n {
            return ObjLevel::ALL[k];
        }
        u -= n;
    }
    unreachable!("histogram sums to total")
}

/// γ = 1 − δ(a)/δ(c).
///
/// No observed disorder gives γ = 1 regardless of the null. A zero null
/// disorder with disagreement present is [`Error::DegenerateNull`].
pub fn gamma(sequences: &[Vec<ObjLevel>], cfg: &GammaConfig) -> Result<GammaResult> {
    let observed = observed_disorder(sequences, cfg)?;
    let expected = expected_disorder(sequences, cfg)?;
    let gamma = if observed.value == 0.0 {
        1.0
    } else if expected == 0.0 {
        return Err(Error::DegenerateNull {
            observed: observed.value,
        });
    } else {
        1.0 - observed.value / expected
    };
    Ok(GammaResult {
        gamma,
        observed_disorder: observed.value,
        expected_disorder: expected,
        n_pairs: observed.n_pairs,
    })
}

/// Level sequences of one film, keyed by annotator, all over the same clips.
pub type FilmSequences = BTreeMap<String, Vec<ObjLevel>>;

/// Groups per-annotator projections into aligned sequences per film.
///
/// Each label must name exactly one annotator. Clip order follows the first
/// annotator (lexicographically) of each film; every other annotator must
/// cover the same clip set.
pub fn sequences_from_projections(labels: &[ClipLabel]) -> Result<BTreeMap<String, FilmSequences>> {
    type ClipLevels<'a> = Vec<(&'a str, ObjLevel)>;
    let mut raw: BTreeMap<&str, BTreeMap<&str, ClipLevels>> = BTreeMap::new();
    for l in labels {
        let mut who = l.annotators.iter();
        let (Some(annotator), None) = (who.next(), who.next()) else {
            return Err(Error::Shape(format!(
                "projection of clip {} must name exactly one annotator",
                l.clip_id
            )));
        };
        raw.entry(&l.film_id)
            .or_default()
            .entry(annotator)
            .or_default()
            .push((&l.clip_id, l.level));
    }
    let mut out = BTreeMap::new();
    for (film, by_annotator) in raw {
        let mut iter = by_annotator.iter();
        let (_, reference) = iter.next().expect("film has an annotator");
        let order: Vec<&str> = reference.iter().map(|(c, _)| *c).collect();
        let position: BTreeMap<&str, usize> =
            order.iter().enumerate().map(|(i, c)| (*c, i)).collect();
        let mut seqs = FilmSequences::new();
        for (&annotator, entries) in &by_annotator {
            let mut seq = vec![None; order.len()];
            for &(clip, level) in entries {
                let slot = position.get(clip).ok_or(Error::ClipSetMismatch)?;
                if seq[*slot].replace(level).is_some() {
                    return Err(Error::ClipSetMismatch);
                }
            }
            let seq = seq
                .into_iter()
                .collect::<Option<Vec<_>>>()
                .ok_or(Error::ClipSetMismatch)?;
            seqs.insert(annotator.to_owned(), seq);
        }
        out.insert(film.to_owned(), seqs);
    }
    Ok(out)
}

/// γ of one annotator pair (or, with `pair = None`, of all annotators) on a film.
#[derive(Debug, Clone, PartialEq)]
pub struct FilmGamma {
    pub film: String,
    pub pair: Option<(String, String)>,
    pub result: GammaResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgreementReport {
    /// Pairwise rows, plus one all-annotator row per film with three or more annotators.
    pub rows: Vec<FilmGamma>,
    /// Mean γ over annotator pairs, every pair weighted equally.
    pub average: f64,
    pub pair_count: usize,
}

/// Runs γ for every annotator pair of every film and averages over pairs.
///
/// Each pair's null draws derive from the base seed and the film and
/// annotator names, so adding films or annotators leaves other rows intact.
pub fn gamma_per_film_and_average(
    films: &BTreeMap<String, FilmSequences>,
    cfg: &GammaConfig,
) -> Result<AgreementReport> {
    let mut jobs = Vec::new();
    for (film, seqs) in films {
        if seqs.len() < 2 {
            return Err(Error::FewerThanTwoAnnotators(seqs.len()));
        }
        let names: Vec<&String> = seqs.keys().collect();
        for (i, a) in names.iter().enumerate() {
            for b in &names[i + 1..] {
                jobs.push((film, Some(((*a).clone(), (*b).clone()))));
            }
        }
        if names.len() > 2 {
            jobs.push((film, None));
        }
    }
    let rows = jobs
        .into_par_iter()
        .map(|(film, pair)| {
            let seqs = &films[film];
            let (sequences, path): (Vec<Vec<ObjLevel>>, Vec<u64>) = match &pair {
                Some((a, b)) => (
                    vec![seqs[a].clone(), seqs[b].clone()],
                    vec![seed::hash_str(film), seed::hash_str(a), seed::hash_str(b)],
                ),
                None => (seqs.values().cloned().collect(), vec![seed::hash_str(film)]),
            };
            let pair_cfg = GammaConfig {
                seed: seed::derive(cfg.seed, &path),
                ..cfg.clone()
            };
            gamma(&sequences, &pair_cfg).map(|result| FilmGamma {
                film: film.clone(),
                pair,
                result,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pairwise: Vec<f64> = rows
        .iter()
        .filter(|r| r.pair.is_some())
        .map(|r| r.result.gamma)
        .collect();
    let pair_count = pairwise.len();
    let average = if pair_count == 0 {
        f64::NAN
    } else {
        pairwise.iter().sum::<f64>() / pair_count as f64
    };
    Ok(AgreementReport {
        rows,
        average,
        pair_count,
    })
}

/// `film,pair,gamma,delta_a,delta_c,n_pairs`, closing with an `average` row
/// whose `n_pairs` column is the number of annotator pairs averaged.
pub fn report_csv(report: &AgreementReport) -> String {
    let mut out = String::from("film,pair,gamma,delta_a,delta_c,n_pairs\n");
    for r in &report.rows {
        let pair = match &r.pair {
            Some((a, b)) => format!("{a}|{b}"),
            None => "*".to_owned(),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.film,
            pair,
            r.result.gamma,
            r.result.observed_disorder,
            r.result.expected_disorder,
            r.result.n_pairs
        ));
    }
    out.push_str(&format!(
        "average,,{},,,{}\n",
        report.average, report.pair_count
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ObjLevel::*;

    fn cfg() -> GammaConfig {
        GammaConfig::with_seed(42)
    }

    #[test]
    fn dissimilarity_values() {
        assert_eq!(d_c(EN, EN), 0.0);
        assert_eq!(d_c(EN, S), 1.0);
        assert_eq!(d_c(HN, NS), 0.4);
        assert_eq!(d_c(EN, HN), 0.3);
        assert_eq!(d_c(EN, NS), 0.7);
        assert_eq!(d_c(HN, S), 0.7);
        assert_eq!(d_c(NS, S), 0.3);
    }

    #[test]
    fn dissimilarity_is_a_metric() {
        for u in ObjLevel::ALL {
            assert_eq!(d_c(u, u), 0.0);
            for v in ObjLevel::ALL {
                assert_eq!(d_c(u, v), d_c(v, u));
                for w in ObjLevel::ALL {
                    assert!(d_c(u, w) <= d_c(u, v) + d_c(v, w) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn observed_examples() {
        let same = observed_disorder(&[vec![EN, S], vec![EN, S]], &cfg()).unwrap();
        assert_eq!((same.value, same.n_pairs), (0.0, 2));
        let half = observed_disorder(&[vec![EN, S], vec![EN, HN]], &cfg()).unwrap();
        assert!((half.value - 0.35).abs() < 1e-12);
        let three = observed_disorder(&[vec![EN], vec![HN], vec![S]], &cfg()).unwrap();
        assert!((three.value - 2.0 / 3.0).abs() < 1e-9);
        assert_eq!(three.n_pairs, 3);
    }

    #[test]
    fn shape_errors() {
        assert!(matches!(
            observed_disorder(&[vec![EN]], &cfg()),
            Err(Error::FewerThanTwoAnnotators(1))
        ));
        assert!(matches!(
            observed_disorder(&[vec![EN], vec![EN, S]], &cfg()),
            Err(Error::LengthMismatch { .. })
        ));
        let bad = GammaConfig { n_null: 0, ..cfg() };
        assert!(observed_disorder(&[vec![EN], vec![EN]], &bad).is_err());
    }

    #[test]
    fn exclusion_is_pairwise() {
        let seqs = [vec![NS, S, EN], vec![S, S, HN]];
        let d = observed_disorder(&seqs, &cfg().excluding(NS)).unwrap();
        assert_eq!(d.n_pairs, 2);
        assert!((d.value - 0.15).abs() < 1e-12);
        let all_ns = [vec![NS], vec![NS]];
        let d = observed_disorder(&all_ns, &cfg().excluding(NS)).unwrap();
        assert_eq!((d.value, d.n_pairs), (0.0, 0));
    }

    #[test]
    fn constant_null_is_zero() {
        let seqs = vec![vec![EN; 30], vec![EN; 30]];
        assert_eq!(expected_disorder(&seqs, &cfg()).unwrap(), 0.0);
        assert_eq!(gamma(&seqs, &cfg()).unwrap().gamma, 1.0);
    }

    #[test]
    fn degenerate_null_is_an_error() {
        // Constant but different annotators: the null reproduces δ(a), γ = 0.
        let r = gamma(&[vec![EN; 5], vec![S; 5]], &cfg()).unwrap();
        assert_eq!(r.gamma, 0.0);
        // With a single null trial, a quarter of seeds redraw two identical
        // sequences and the null disorder collapses while δ(a) = 1.
        let seqs = vec![vec![EN, S], vec![S, EN]];
        let degenerate = (0..64)
            .filter(|&seed| {
                let c = GammaConfig { n_null: 1, seed, ..cfg() };
                matches!(gamma(&seqs, &c), Err(Error::DegenerateNull { observed }) if observed == 1.0)
            })
            .count();
        assert!(degenerate > 0 && degenerate < 64, "{degenerate}");
    }

    #[test]
    fn balanced_two_level_null_matches_closed_form() {
        // Each annotator is 50% EN / 50% S: a random pair mismatches with
        // probability 1/2 at dissimilarity 1, so δ(c) = 0.5.
        let len = 2000;
        let a: Vec<ObjLevel> = (0..len).map(|i| if i % 2 == 0 { EN } else { S }).collect();
        let b: Vec<ObjLevel> = (0..len).map(|i| if i < len / 2 { EN } else { S }).collect();
        let c = GammaConfig {
            n_null: 62,
            ..cfg()
        };
        let dc = expected_disorder(&[a, b], &c).unwrap();
        let sigma = 0.5 / ((len * c.n_null) as f64).sqrt();
        assert!((dc - 0.5).abs() < 3.0 * sigma, "δ(c) = {dc}");
    }

    #[test]
    fn null_is_deterministic_and_invariant() {
        let a = vec![EN, EN, S, HN, NS, EN, S, S, HN, EN];
        let b = vec![EN, HN, S, HN, EN, EN, NS, S, EN, EN];
        let c = vec![S, EN, EN, EN, HN, EN, S, HN, EN, NS];
        let base = gamma(&[a.clone(), b.clone(), c.clone()], &cfg()).unwrap();
        assert_eq!(
            base,
            gamma(&[a.clone(), b.clone(), c.clone()], &cfg()).unwrap()
        );
        assert_eq!(
            base,
            gamma(&[c.clone(), a.clone(), b.clone()], &cfg()).unwrap()
        );
        let perm = [3usize, 7, 0, 9, 1, 2, 8, 4, 6, 5];
        let p = |s: &Vec<ObjLevel>| perm.iter().map(|&i| s[i]).collect::<Vec<_>>();
        assert_eq!(base, gamma(&[p(&a), p(&b), p(&c)], &cfg()).unwrap());
    }

    #[test]
    fn excluding_absent_level_changes_nothing() {
        let a = vec![EN, EN, S, HN, EN, S, HN];
        let b = vec![EN, HN, S, HN, EN, S, EN];
        let with = gamma(&[a.clone(), b.clone()], &cfg().excluding(NS)).unwrap();
        let without = gamma(&[a, b], &cfg()).unwrap();
        assert_eq!(with, without);
    }

    #[test]
    fn per_film_average() {
        let mut films = BTreeMap::new();
        let agree: FilmSequences = [
            ("x".to_owned(), vec![EN, S, HN, EN]),
            ("y".to_owned(), vec![EN, S, HN, EN]),
        ]
        .into();
        films.insert("one".to_owned(), agree.clone());
        let r = gamma_per_film_and_average(&films, &cfg()).unwrap();
        assert_eq!(r.average, 1.0);
        assert_eq!(r.pair_count, 1);

        // Constant but different annotators: δ(a) = δ(c) so γ = 0.
        let split: FilmSequences =
            [("x".to_owned(), vec![EN; 4]), ("y".to_owned(), vec![S; 4])].into();
        films.insert("two".to_owned(), split);
        let r = gamma_per_film_and_average(&films, &cfg()).unwrap();
        assert_eq!(r.average, 0.5);

        films.insert("solo".to_owned(), [("x".to_owned(), vec![EN])].into());
        assert!(matches!(
            gamma_per_film_and_average(&films, &cfg()),
            Err(Error::FewerThanTwoAnnotators(1))
        ));
    }

    #[test]
    fn sequences_from_labels() {
        let l = |film: &str, clip: &str, who: &str, level| {
            let cs = if level == EN {
                vec![]
            } else {
                vec![crate::annotation::Concept::Body]
            };
            ClipLabel::new(film, clip, level, cs, [who.to_owned()]).unwrap()
        };
        let labels = vec![
            l("f", "c1", "a", EN),
            l("f", "c2", "a", S),
            l("f", "c2", "b", HN),
            l("f", "c1", "b", EN),
        ];
        let seqs = sequences_from_projections(&labels).unwrap();
        assert_eq!(seqs["f"]["a"], vec![EN, S]);
        assert_eq!(seqs["f"]["b"], vec![EN, HN]);
        let missing = vec![
            l("f", "c1", "a", EN),
            l("f", "c2", "a", S),
            l("f", "c1", "b", EN),
        ];
        assert!(matches!(
            sequences_from_projections(&missing),
            Err(Error::ClipSetMismatch)
        ));
    }
}
