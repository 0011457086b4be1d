//! Statistics fixtures computed ahead of time with an independent
//! implementation (scipy.stats and exact enumeration).

#![allow(dead_code)]

/// differences, t, p, df
pub const PAIRED_T: &[(&[f64], f64, f64, usize)] = &[
    (&[2.0, 4.0, 6.0], 3.464101615137755, 0.07417990022744853, 2),
    (&[0.05, 0.08, 0.03, 0.06, 0.02, 0.07], 5.463032170589371, 0.002796587099429074, 5),
    (&[1.5, -0.3, 2.2, 0.9, 1.1], 2.6317989656743284, 0.0580766788841889, 4),
    (&[-1.0, -2.0, -0.5, -3.25], -2.7799128033710496, 0.06899570549042074, 3),
    (&[0.1, -0.1, 0.2, -0.2, 0.05, 0.3, -0.05], 0.6507913734559685, 0.5392887209758064, 6),
    (&[10.0, 11.0], 21.0, 0.030292344376736283, 1),
];

/// values, mean, sem
pub const MEAN_SEM: &[(&[f64], f64, f64)] = &[
    (&[0.772, 0.813, 0.848, 0.873, 0.884, 0.909], 0.8498333333333333, 0.02051246233661652),
    (&[0.758, 0.778, 0.798, 0.818, 0.833, 0.864], 0.8081666666666667, 0.01566400686641547),
    (&[1.0, 2.0, 3.0, 4.0], 2.5, 0.6454972243679028),
];

/// The six expert concordances and the reported mean and SEM.
pub const EXPERT_SIX: [f64; 6] = [0.772, 0.813, 0.848, 0.873, 0.884, 0.909];
pub const EXPERT_SIX_REPORTED: (f64, f64) = (0.850, 0.020);

/// a, b, U, two-sided p from the exact permutation distribution
pub const MANN_WHITNEY_EXACT: &[(&[f64], &[f64], f64, f64)] = &[
    (&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], 0.0, 0.1),
    (&[1.0], &[2.0], 0.0, 1.0),
    (&[3.0, 1.0, 4.0, 1.0, 5.0], &[9.0, 2.0, 6.0, 5.0, 3.0, 5.0], 6.5, 0.1406926406926407),
    (&[0.2, 0.4, 0.4, 0.9], &[0.1, 0.4, 0.5, 0.5, 0.7], 9.0, 0.8412698412698413),
    (&[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0], 4.5, 1.0),
    (
        &[2.5, 3.1, 4.7, 1.2, 3.3, 2.2, 4.0],
        &[5.1, 3.9, 6.2, 4.4, 5.5, 4.8],
        3.0,
        0.008158508158508158,
    ),
];

pub const MW_LARGE_A: [f64; 25] = [
    0.0, 0.3, -0.27, -0.89, -0.45, -0.99, 0.06, 1.34, -0.49, -0.62, 0.49, 0.36, 0.11, -0.93, -0.03, 0.7, -1.34,
    -0.46, -1.9, -1.29, -1.84, -0.24, -1.27, 0.27, 0.16,
];
pub const MW_LARGE_B: [f64; 22] = [
    0.31, -2.02, -0.04, 0.45, 0.61, -1.03, 0.02, -0.48, -0.31, 1.56, -0.31, 0.47, 1.38, -0.08, 0.39, 0.61, 0.56,
    -0.73, 0.58, 1.86, -1.05, 1.36,
];
/// U and p of the normal approximation with tie and continuity correction
pub const MW_LARGE: (f64, f64) = (175.0, 0.033882287778833016);

pub fn mw_ties() -> (Vec<f64>, Vec<f64>) {
    let a = [1.0, 2.0, 2.0, 3.0, 3.0, 3.0, 4.0, 4.0, 5.0];
    let b = [2.0, 3.0, 3.0, 4.0, 4.0, 5.0, 5.0, 5.0, 6.0];
    (a.repeat(3), b.repeat(3))
}
pub const MW_TIES: (f64, f64) = (193.5, 0.0025016979688868477);

/// x, y, r, p
pub const PEARSON: &[(&[f64], &[f64], f64, f64)] = &[
    (&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 4.0, 5.0, 4.0, 5.0], 0.7745966692414834, 0.1240270626575546),
    (
        &[0.1, 0.5, 0.3, 0.9, 0.7, 0.2],
        &[0.3, 0.6, 0.2, 0.8, 0.9, 0.1],
        0.8915429457901229,
        0.0170065124020661,
    ),
    (&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0], -0.5, 0.6666666666666666),
    (
        &[5.0, 3.0, 8.0, 1.0, 9.0, 4.0, 7.0],
        &[2.0, 1.0, 4.0, 0.5, 6.0, 3.0, 3.0],
        0.9149773821555274,
        0.0038655961472082515,
    ),
];

/// scores, positive flags, auc
pub const AUC: &[(&[f64], &[u8], f64)] = &[
    (&[0.9, 0.8, 0.7, 0.3, 0.2], &[1, 1, 0, 1, 0], 0.8333333333333333),
    (&[0.5, 0.5, 0.5, 0.1, 0.9, 0.9], &[1, 0, 1, 0, 1, 0], 0.6111111111111112),
    (&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1], 0.75),
    (&[0.0, 0.25, 0.25, 0.5, 0.75, 1.0, 1.0], &[0, 0, 1, 0, 1, 1, 0], 0.6666666666666666),
];

/// t, df, two-sided p
pub const T_TAIL: &[(f64, f64, f64)] = &[
    (3.4641016151377544, 2.0, 0.07417990022744854),
    (1.0, 5.0, 0.36321746764912255),
    (2.5, 10.0, 0.031446844236608776),
    (0.3, 1.0, 0.8144528418445154),
    (4.0, 30.0, 0.0003818456360837564),
];

/// z, two-sided p
pub const NORMAL_TAIL: &[(f64, f64)] = &[
    (0.5, 0.6170750774519738),
    (1.96, 0.04999579029644087),
    (3.0, 0.0026997960632601866),
    (5.0, 5.733031437583866e-07),
];

pub fn flags(v: &[u8]) -> Vec<bool> {
    v.iter().map(|&x| x == 1).collect()
}
