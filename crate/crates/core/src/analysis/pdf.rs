use super::special::{bernoulli_step, binomial_vec, check_probability, RankTable};
use super::{AnalysisError, CarryoverState, ErasureNetworkParams, TransmissionPdf, Truncation};

/// Count-distribution entries below this are dropped from the sliding
/// window in the two-phase recursion.
const NEGLIGIBLE: f64 = 1e-30;
/// Phase-one end times with less probability than this are skipped.
const NEGLIGIBLE_START: f64 = 1e-16;

/// Decode time of one receiver fed by a single erasure link, over
/// `M = 0..=support`.
#[derive(Clone, Debug)]
pub(crate) struct DecodeTime {
    pub pmf: Vec<f64>,
    /// `P(T > M)`, evaluated analytically rather than by summing `pmf`.
    pub survival: Vec<f64>,
}

impl DecodeTime {
    /// `P(T >= M)`.
    pub fn at_least(&self, m: usize) -> f64 {
        self.pmf[m] + self.survival[m]
    }
}

/// `g_{held,Pe}` before normalisation: decode happens at slot M when the
/// M-th slot is unerased and brings the decoding packet.
pub(crate) fn decode_time(rank: &RankTable, held: usize, success: f64, support: usize) -> DecodeTime {
    let mut pmf = Vec::with_capacity(support + 1);
    let mut survival = Vec::with_capacity(support + 1);
    pmf.push(rank.cdf(held));
    survival.push((1.0 - rank.cdf(held)).max(0.0));
    let mut counts = vec![1.0];
    for _ in 1..=support {
        let p: f64 = counts
            .iter()
            .enumerate()
            .map(|(n, a)| a * rank.pmf(n + 1 + held))
            .sum();
        pmf.push(success * p);
        bernoulli_step(&mut counts, success);
        let s: f64 = counts
            .iter()
            .enumerate()
            .map(|(n, a)| a * (1.0 - rank.cdf(n + held)))
            .sum();
        survival.push(s.max(0.0));
    }
    DecodeTime { pmf, survival }
}

/// Eq. (6)-style "first of R i.i.d. receivers": the binomial expansion over
/// how many of them decode exactly now while the rest are still busy.
fn first_of(pmf: f64, busy_after: f64, relays: usize) -> f64 {
    let mut total = 0.0;
    let mut choose = 1.0;
    for r in 1..=relays {
        choose = choose * (relays - r + 1) as f64 / r as f64;
        total += choose * pmf.powi(r as i32) * busy_after.powi((relays - r) as i32);
    }
    total
}

/// Probability that the earliest of `relays` i.i.d. relays decodes at slot `j`.
pub fn relay_any_decode_pmf(j: usize, relay: &TransmissionPdf, relays: usize) -> f64 {
    first_of(relay.prob(j), relay.survival(j), relays)
}

/// Probability that either relay decodes first at slot `j` given their
/// decode-time laws. A simultaneous decode is charged once, to the second
/// relay's term.
pub fn tilde_q(j: usize, relay1: &TransmissionPdf, relay2: &TransmissionPdf) -> f64 {
    relay1.prob(j) * relay2.survival(j) + relay2.prob(j) * (relay1.prob(j) + relay1.survival(j))
}

struct TwoPhase<'a> {
    rank: &'a RankTable,
    support: usize,
    held: usize,
    phase1: f64,
    phase2: f64,
}

struct TwoPhaseOutput {
    values: Vec<f64>,
    tail: Vec<f64>,
}

impl TwoPhase<'_> {
    /// Combines "D decodes while every relay is still busy" with "phase one
    /// ends at j, then D collects current-block packets at the phase-two
    /// rate". `start[j]` is the probability that phase one ends at `j`,
    /// `all_busy_ge[M]` that no relay decoded before M, `all_busy_gt[M]`
    /// that none decoded by M. `on_branch` sees the conditional decode-time
    /// law of D for each phase-one end time.
    fn run(
        &self,
        direct: &DecodeTime,
        start: &[f64],
        all_busy_ge: &[f64],
        all_busy_gt: &[f64],
        mut on_branch: impl FnMut(usize, &[f64]),
    ) -> TwoPhaseOutput {
        let len = self.support + 1;
        let mut values: Vec<f64> = (0..len).map(|m| direct.pmf[m] * all_busy_ge[m]).collect();
        let mut tail: Vec<f64> = (0..len).map(|m| direct.survival[m] * all_busy_gt[m]).collect();

        let decode_next: Vec<f64> = (0..=len).map(|n| self.rank.pmf(n + 1 + self.held)).collect();
        let undecoded: Vec<f64> = (0..=len)
            .map(|n| (1.0 - self.rank.cdf(n + self.held)).max(0.0))
            .collect();

        let mut branch = Vec::with_capacity(len);
        for (j, &w) in start.iter().enumerate().take(len) {
            if w < NEGLIGIBLE_START {
                continue;
            }
            let mut counts = binomial_vec(j, self.phase1);
            let (mut lo, mut hi) = (0usize, j);
            shrink(&counts, &mut lo, &mut hi);
            tail[j] += w * dot(&counts, &undecoded, lo, hi);
            branch.clear();
            for m in j + 1..len {
                let h = self.phase2 * dot(&counts, &decode_next, lo, hi);
                branch.push(h);
                values[m] += w * h;
                step_window(&mut counts, self.phase2, lo, &mut hi);
                shrink(&counts, &mut lo, &mut hi);
                tail[m] += w * dot(&counts, &undecoded, lo, hi);
            }
            on_branch(j, &branch);
        }
        for t in tail.iter_mut() {
            *t = t.max(0.0);
        }
        TwoPhaseOutput { values, tail }
    }
}

fn dot(a: &[f64], b: &[f64], lo: usize, hi: usize) -> f64 {
    if lo > hi {
        return 0.0;
    }
    a[lo..=hi].iter().zip(&b[lo..=hi]).map(|(x, y)| x * y).sum()
}

fn step_window(counts: &mut Vec<f64>, success: f64, lo: usize, hi: &mut usize) {
    let fail = 1.0 - success;
    if counts.len() <= *hi + 1 {
        counts.push(0.0);
    }
    counts[*hi + 1] = 0.0;
    for n in (lo + 1..=*hi + 1).rev() {
        counts[n] = counts[n] * fail + counts[n - 1] * success;
    }
    counts[lo] *= fail;
    *hi += 1;
}

fn shrink(counts: &[f64], lo: &mut usize, hi: &mut usize) {
    while *lo < *hi && counts[*lo] < NEGLIGIBLE {
        *lo += 1;
    }
    while *hi > *lo && counts[*hi] < NEGLIGIBLE {
        *hi -= 1;
    }
}

/// Grows the support until the tail drops below `tol`, then trims to
/// `max(4K, first M with tail < tol)`.
fn with_growing_support<F>(k: usize, trunc: &Truncation, mut compute: F) -> Result<TransmissionPdf, AnalysisError>
where
    F: FnMut(usize) -> Result<(Vec<f64>, Vec<f64>), AnalysisError>,
{
    if !(trunc.tol > 0.0) {
        return Err(AnalysisError::Domain(format!("tolerance {} must be positive", trunc.tol)));
    }
    let limit = trunc.limit(k);
    let floor = (4 * k).min(limit);
    let mut support = floor;
    loop {
        let (raw, tail) = compute(support)?;
        if let Some(cut) = (floor..=support).find(|&m| tail[m] < trunc.tol) {
            let values = &raw[..=cut];
            let normalizer = values.iter().sum::<f64>() + tail[cut];
            return Ok(TransmissionPdf {
                values: values.iter().map(|v| v / normalizer).collect(),
                tail_mass: tail[cut] / normalizer,
                normalizer,
            });
        }
        if support >= limit {
            return Err(AnalysisError::Truncation {
                achieved: tail[support],
                tol: trunc.tol,
                support,
            });
        }
        support = (support * 2).min(limit);
    }
}

fn check_pe_below_one(name: &str, pe: f64) -> Result<(), AnalysisError> {
    check_probability(name, pe)?;
    if pe >= 1.0 {
        return Err(AnalysisError::Domain(format!("{name} must be below 1")));
    }
    Ok(())
}

/// Decode-time law `g_{held,Pe}` of a receiver that already holds `held`
/// packets; with `held = 0` this is the direct-transmission pdf.
pub fn decode_time_pdf(
    k: usize,
    held: usize,
    pe: f64,
    trunc: &Truncation,
) -> Result<TransmissionPdf, AnalysisError> {
    if k == 0 {
        return Err(AnalysisError::Domain("block length K must be at least 1".into()));
    }
    check_pe_below_one("erasure probability", pe)?;
    with_growing_support(k, trunc, |support| {
        let rank = RankTable::new(k, support + held + 2);
        let d = decode_time(&rank, held, 1.0 - pe, support);
        Ok((d.pmf, d.survival))
    })
}

/// `g_{held,Pe}(m)`.
pub fn aux_g(k: usize, held: usize, pe: f64, m: usize, trunc: &Truncation) -> Result<f64, AnalysisError> {
    Ok(decode_time_pdf(k, held, pe, trunc)?.prob(m))
}

/// Transmissions needed by direct source-to-destination fountain coding.
pub fn direct_pdf(k: usize, pe: f64, trunc: &Truncation) -> Result<TransmissionPdf, AnalysisError> {
    decode_time_pdf(k, 0, pe, trunc)
}

/// Naive two-phase relaying with `params.relays` relays: whichever relay
/// decodes first takes over and the others stay silent.
pub fn naive_pdf(params: &ErasureNetworkParams, trunc: &Truncation) -> Result<TransmissionPdf, AnalysisError> {
    params.validate()?;
    check_pe_below_one("Pe_SD", params.pe_sd)?;
    let k = params.k;
    let relays = params.relays;
    with_growing_support(k, trunc, |support| {
        let rank = RankTable::new(k, support + 2);
        let direct = decode_time(&rank, 0, 1.0 - params.pe_sd, support);
        let relay = decode_time(&rank, 0, 1.0 - params.pe_sr, support);
        let start: Vec<f64> = (0..=support)
            .map(|j| first_of(relay.pmf[j], relay.survival[j], relays))
            .collect();
        let ge: Vec<f64> = (0..=support)
            .map(|m| relay.at_least(m).powi(relays as i32))
            .collect();
        let gt: Vec<f64> = relay.survival.iter().map(|s| s.powi(relays as i32)).collect();
        let engine = TwoPhase {
            rank: &rank,
            support,
            held: 0,
            phase1: 1.0 - params.pe_sd,
            phase2: 1.0 - params.pe_rd,
        };
        let out = engine.run(&direct, &start, &ge, &gt, |_, _| {});
        Ok((out.values, out.tail))
    })
}

/// Joint law behind the network-coded pdf for one carryover state, kept
/// around so block chains can sample `(winner, j, M)` without recomputing.
#[derive(Clone, Debug)]
pub struct NetcodedJoint {
    pub carryover: CarryoverState,
    pub pdf: TransmissionPdf,
    /// Normalised mass of "D decodes before either relay" at each M.
    pub destination_first: Vec<f64>,
    pub branches: Vec<PhaseTwoBranch>,
}

/// Phase one ended at slot `j`.
#[derive(Clone, Debug)]
pub struct PhaseTwoBranch {
    pub j: usize,
    /// Normalised probability that relay 1 alone ends phase one at `j`.
    pub relay1_weight: f64,
    /// Same for relay 2, including simultaneous decodes.
    pub relay2_weight: f64,
    /// `decode_at[i]` is P(D decodes at `j + 1 + i` | phase one ended at j).
    pub decode_at: Vec<f64>,
}

/// Network-coded scheme with carryover `(n1, n2, n3)` at R1, R2 and D.
pub fn netcoded_pdf(
    params: &ErasureNetworkParams,
    carryover: CarryoverState,
    trunc: &Truncation,
) -> Result<TransmissionPdf, AnalysisError> {
    Ok(netcoded_joint(params, carryover, trunc)?.pdf)
}

pub fn netcoded_joint(
    params: &ErasureNetworkParams,
    carryover: CarryoverState,
    trunc: &Truncation,
) -> Result<NetcodedJoint, AnalysisError> {
    params.validate()?;
    if params.relays != 2 {
        return Err(AnalysisError::RelayCount(params.relays));
    }
    check_pe_below_one("Pe_SD", params.pe_sd)?;
    let k = params.k;
    let eq = params.equivalent_erasures();
    let CarryoverState { n1, n2, n3 } = carryover;
    let mut first = Vec::new();
    let mut branches = Vec::new();
    let pdf = with_growing_support(k, trunc, |support| {
        let rank = RankTable::new(k, support + n1.max(n2).max(n3) + 2);
        let direct = decode_time(&rank, n3, 1.0 - params.pe_sd, support);
        let g1 = decode_time(&rank, n1, 1.0 - params.pe_sr, support);
        let g2 = decode_time(&rank, n2, 1.0 - params.pe_sr, support);
        let w1: Vec<f64> = (0..=support).map(|j| g1.pmf[j] * g2.survival[j]).collect();
        let w2: Vec<f64> = (0..=support).map(|j| g2.pmf[j] * g1.at_least(j)).collect();
        let start: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| a + b).collect();
        let ge: Vec<f64> = (0..=support).map(|m| g1.at_least(m) * g2.at_least(m)).collect();
        let gt: Vec<f64> = (0..=support).map(|m| g1.survival[m] * g2.survival[m]).collect();
        let engine = TwoPhase {
            rank: &rank,
            support,
            held: n3,
            phase1: 1.0 - params.pe_sd,
            phase2: 1.0 - eq.destination_current,
        };
        branches.clear();
        let out = engine.run(&direct, &start, &ge, &gt, |j, h| {
            branches.push(PhaseTwoBranch {
                j,
                relay1_weight: w1[j],
                relay2_weight: w2[j],
                decode_at: h.to_vec(),
            });
        });
        first = (0..=support).map(|m| direct.pmf[m] * ge[m]).collect();
        Ok((out.values, out.tail))
    })?;
    let cut = pdf.values.len();
    let norm = pdf.normalizer;
    first.truncate(cut);
    for v in first.iter_mut() {
        *v /= norm;
    }
    branches.retain(|b| b.j + 1 < cut);
    for b in branches.iter_mut() {
        b.relay1_weight /= norm;
        b.relay2_weight /= norm;
        b.decode_at.truncate(cut - b.j - 1);
    }
    Ok(NetcodedJoint {
        carryover,
        pdf,
        destination_first: first,
        branches,
    })
}

#[cfg(test)]
mod tests {
    use super::super::special::{binomial_pmf, decode_pmf};
    use super::*;

    fn trunc() -> Truncation {
        Truncation::default()
    }

    /// Eq. (5) summed literally with log-space binomials.
    fn direct_literal(k: usize, pe: f64, m: usize) -> f64 {
        if m == 0 {
            return 0.0;
        }
        (k.saturating_sub(1)..m)
            .map(|i| binomial_pmf((m - 1) as u64, pe, i as u64).unwrap() * decode_pmf(k, i + 1))
            .sum::<f64>()
            * (1.0 - pe)
    }

    #[test]
    fn direct_k1_no_erasure_halves() {
        let pdf = direct_pdf(1, 0.0, &trunc()).unwrap();
        assert_eq!(pdf.prob(0), 0.0);
        for m in 1..30 {
            assert!((pdf.prob(m) - 0.5f64.powi(m as i32)).abs() < 1e-12, "M={m}");
        }
    }

    #[test]
    fn direct_matches_literal_sum() {
        for (k, pe) in [(1, 0.3), (5, 0.0), (12, 0.4), (30, 0.7)] {
            let pdf = direct_pdf(k, pe, &trunc()).unwrap();
            for m in 0..pdf.values.len().min(200) {
                let lit = direct_literal(k, pe, m);
                assert!((pdf.prob(m) - lit).abs() < 1e-12, "K={k} Pe={pe} M={m}");
            }
            assert!((pdf.normalizer - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn direct_k100_mean() {
        let s = direct_pdf(100, 0.0, &trunc()).unwrap().stats();
        assert!((s.mean - 101.6067).abs() < 1e-3, "{}", s.mean);
        // erasures stretch the mean by 1/(1-Pe)
        let s = direct_pdf(100, 0.4, &trunc()).unwrap().stats();
        assert!((s.mean - 101.6067 / 0.6).abs() < 1e-2, "{}", s.mean);
    }

    #[test]
    fn truncation_failure_reports_tail() {
        let t = Truncation {
            tol: 1e-12,
            max_support: Some(120),
        };
        match direct_pdf(100, 0.0, &t) {
            Err(AnalysisError::Truncation { achieved, support, .. }) => {
                assert_eq!(support, 120);
                assert!(achieved > 1e-12);
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn direct_rejects_certain_erasure() {
        assert!(direct_pdf(10, 1.0, &trunc()).is_err());
    }

    #[test]
    fn aux_g_with_nothing_held_is_direct() {
        let d = direct_pdf(20, 0.3, &trunc()).unwrap();
        let g = decode_time_pdf(20, 0, 0.3, &trunc()).unwrap();
        for m in 0..d.values.len() {
            assert!((d.prob(m) - g.prob(m)).abs() < 1e-12);
        }
    }

    #[test]
    fn aux_g_immediate_decode_mass() {
        let g = decode_time_pdf(10, 15, 0.2, &trunc()).unwrap();
        let f = super::super::full_rank_cdf(10, 15);
        assert!((g.prob(0) - f / g.normalizer).abs() < 1e-12);
        assert!(g.prob(0) > 0.0);
    }

    #[test]
    fn aux_g_k2_one_held() {
        let g = decode_time_pdf(2, 1, 0.0, &trunc()).unwrap();
        assert!((g.prob(1) - 0.375 / g.normalizer).abs() < 1e-12);
    }

    #[test]
    fn relay_any_single_relay_is_identity() {
        let p = direct_pdf(10, 0.2, &trunc()).unwrap();
        for j in 0..p.values.len() {
            assert!((relay_any_decode_pmf(j, &p, 1) - p.prob(j)).abs() < 1e-15);
        }
    }

    #[test]
    fn relay_any_matches_min_identity_and_sums_to_one() {
        let p = direct_pdf(20, 0.2, &trunc()).unwrap();
        for relays in [2, 3, 5] {
            let mut total = 0.0;
            for j in 0..p.values.len() {
                let q = relay_any_decode_pmf(j, &p, relays);
                let ge = p.prob(j) + p.survival(j);
                let identity = ge.powi(relays as i32) - p.survival(j).powi(relays as i32);
                assert!((q - identity).abs() < 1e-12);
                total += q;
            }
            assert!((total - 1.0).abs() < 1e-8, "R={relays}: {total}");
        }
    }

    #[test]
    fn relay_any_point_mass() {
        let p = TransmissionPdf::point_mass(17);
        assert_eq!(relay_any_decode_pmf(17, &p, 2), 1.0);
        assert_eq!(relay_any_decode_pmf(16, &p, 2), 0.0);
    }

    #[test]
    fn naive_is_proper() {
        let pdf = naive_pdf(&ErasureNetworkParams::default(), &trunc()).unwrap();
        assert!((pdf.normalizer - 1.0).abs() < 1e-8, "{}", pdf.normalizer);
        assert!(pdf.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn naive_without_working_relays_is_direct() {
        let params = ErasureNetworkParams {
            pe_sr: 1.0,
            ..Default::default()
        };
        let naive = naive_pdf(&params, &trunc()).unwrap();
        let direct = direct_pdf(100, 0.4, &trunc()).unwrap();
        for m in 0..naive.values.len().max(direct.values.len()) {
            assert!((naive.prob(m) - direct.prob(m)).abs() < 1e-12);
        }
    }

    #[test]
    fn naive_beats_direct_at_default_params() {
        let params = ErasureNetworkParams::default();
        let naive = naive_pdf(&params, &trunc()).unwrap().stats();
        let direct = direct_pdf(100, 0.4, &trunc()).unwrap().stats();
        assert!(naive.mean < direct.mean, "{} vs {}", naive.mean, direct.mean);
    }

    #[test]
    fn tilde_q_sums_to_one() {
        let g1 = decode_time_pdf(30, 0, 0.2, &trunc()).unwrap();
        let g2 = decode_time_pdf(30, 10, 0.2, &trunc()).unwrap();
        let len = g1.values.len().max(g2.values.len());
        let total: f64 = (0..len).map(|j| tilde_q(j, &g1, &g2)).sum();
        assert!((total - 1.0).abs() < 1e-8);
    }

    #[test]
    fn tilde_q_symmetric_equals_eq6() {
        let g = decode_time_pdf(30, 5, 0.2, &trunc()).unwrap();
        for j in 0..g.values.len() {
            assert!((tilde_q(j, &g, &g) - relay_any_decode_pmf(j, &g, 2)).abs() < 1e-14);
        }
    }

    #[test]
    fn tilde_q_immediate_relay() {
        let g1 = TransmissionPdf::point_mass(0);
        let g2 = decode_time_pdf(30, 0, 0.2, &trunc()).unwrap();
        assert!((tilde_q(0, &g1, &g2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn netcoded_is_proper_and_nonnegative() {
        for c in [
            CarryoverState::ZERO,
            CarryoverState::new(0, 40, 30),
            CarryoverState::new(0, 0, 110),
        ] {
            let pdf = netcoded_pdf(&ErasureNetworkParams::default(), c, &trunc()).unwrap();
            assert!((pdf.normalizer - 1.0).abs() < 1e-8, "{c:?}: {}", pdf.normalizer);
            assert!(pdf.values.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn netcoded_requires_two_relays() {
        let params = ErasureNetworkParams {
            relays: 3,
            ..Default::default()
        };
        assert!(matches!(
            netcoded_pdf(&params, CarryoverState::ZERO, &trunc()),
            Err(AnalysisError::RelayCount(3))
        ));
    }

    #[test]
    fn netcoded_large_destination_carryover_decodes_early() {
        let pdf = netcoded_pdf(
            &ErasureNetworkParams::default(),
            CarryoverState::new(0, 0, 110),
            &trunc(),
        )
        .unwrap();
        let below_k: f64 = (0..100).map(|m| pdf.prob(m)).sum();
        assert!(below_k > 0.5, "{below_k}");
    }

    #[test]
    fn netcoded_useless_relay_link_tracks_direct_phase_one() {
        // relay-to-D link dead: current-block packets only arrive in phase one
        let params = ErasureNetworkParams {
            pe_rd: 1.0,
            ..Default::default()
        };
        let pdf = netcoded_pdf(&params, CarryoverState::ZERO, &Truncation::with_tol(1e-6));
        // phase two never delivers, so once a relay decodes D is stuck
        assert!(matches!(pdf, Err(AnalysisError::Truncation { .. })));
    }

    #[test]
    fn joint_reassembles_pdf() {
        let params = ErasureNetworkParams::default();
        let joint = netcoded_joint(&params, CarryoverState::new(0, 30, 20), &trunc()).unwrap();
        let mut rebuilt = joint.destination_first.clone();
        for b in &joint.branches {
            for (i, h) in b.decode_at.iter().enumerate() {
                rebuilt[b.j + 1 + i] += (b.relay1_weight + b.relay2_weight) * h;
            }
        }
        for (m, v) in rebuilt.iter().enumerate() {
            assert!((v - joint.pdf.prob(m)).abs() < 1e-13, "M={m}");
        }
    }
}
