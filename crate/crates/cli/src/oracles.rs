//! Formula checks behind `ransig validate`: each kernel against an
//! independent computation (a different arithmetic route or a hand-worked
//! value).

use ransig_core::agent::{bellman_target, compute_reward, RewardWeights};
use ransig_core::netmodel::{antenna_gain_db, bs_power_w, path_loss_db, BsConfig, Position, Scenario};
use ransig_core::sigraph::{pearson, update_lsg_op_weight, update_sg_lsg_weight, Lsg, ObjectiveTargets};
use ransig_core::simkernel::{MetricWindow, StepAverages};

pub const TOLERANCE: f64 = 1e-9;

pub struct OracleRow {
    pub function: &'static str,
    pub case: String,
    pub expected: f64,
    pub got: f64,
}

impl OracleRow {
    pub fn rel_err(&self) -> f64 {
        let scale = self.expected.abs().max(1e-300);
        if self.expected == self.got {
            0.0
        } else {
            (self.got - self.expected).abs() / scale
        }
    }

    pub fn pass(&self) -> bool {
        self.got.is_finite() && (self.rel_err() <= TOLERANCE || (self.expected == 0.0 && self.got.abs() <= TOLERANCE))
    }
}

fn row(function: &'static str, case: String, expected: f64, got: f64) -> OracleRow {
    OracleRow {
        function,
        case,
        expected,
        got,
    }
}

fn path_loss(rows: &mut Vec<OracleRow>) {
    // natural-log route
    let ln10 = std::f64::consts::LN_10;
    for (d, fc) in [(25.0, 3.5), (100.0, 2.0), (250.0, 3.5), (1000.0, 28.0), (35.355, 0.9)] {
        let expected = 28.0 + 22.0 * f64::ln(d) / ln10 + 20.0 * f64::ln(fc) / ln10;
        rows.push(row("path_loss_db", format!("d={d} fc={fc}"), expected, path_loss_db(d, fc).unwrap_or(f64::NAN)));
    }
    // hand-worked: 28 + 22*2 + 20*log10(1) = 72
    rows.push(row("path_loss_db", "d=100 fc=1".into(), 72.0, path_loss_db(100.0, 1.0).unwrap_or(f64::NAN)));
}

fn antenna_gain(rows: &mut Vec<OracleRow>) {
    // 10 - 20 lg cos = 10 - 10 lg cos^2
    for theta in [0.0f64, 5.0, 15.0, 20.0, 25.0, 60.0] {
        let c = (theta * std::f64::consts::PI / 180.0).cos();
        let expected = 10.0 - 10.0 * (c * c).log10();
        rows.push(row("antenna_gain_db", format!("tilt={theta}"), expected, antenna_gain_db(theta).unwrap_or(f64::NAN)));
    }
}

fn bs_power(rows: &mut Vec<OracleRow>) {
    let base = Scenario::default();
    let cases = [(53.0, 0.0, 0.5), (53.0, 1.0, 0.5), (50.0, 0.3, 0.5), (46.0, 0.75, 0.2), (53.0, 0.4, 1.0)];
    for (dbm, load, zeta) in cases {
        let mut scn = base.clone();
        scn.energy_zeta = zeta;
        let cfg = BsConfig::awake(0, Position::default(), dbm, 5.0);
        let p_tx = 10f64.powf((dbm - 30.0) / 10.0);
        let p_om = scn.energy_xi * p_tx + scn.energy_psi * scn.sector_power_multiplier;
        // P_om (zeta + (1 - zeta) load)
        let expected = p_om * (zeta + (1.0 - zeta) * load);
        rows.push(row(
            "bs_power_w",
            format!("{dbm} dBm load={load} zeta={zeta}"),
            expected,
            bs_power_w(&cfg, load, &scn),
        ));
    }
}

fn pearson_cases(rows: &mut Vec<OracleRow>) {
    let cases: [(&str, Vec<f64>, Vec<f64>, f64); 5] = [
        ("y=2x+1", vec![1.0, 2.0, 3.0, 4.0], vec![3.0, 5.0, 7.0, 9.0], 1.0),
        ("y=-x", vec![1.0, 2.0, 3.0], vec![-1.0, -2.0, -3.0], -1.0),
        // sxy = 3, sxx = 2, syy = 6
        ("hand 3/sqrt(12)", vec![1.0, 2.0, 3.0], vec![0.0, 3.0, 3.0], 3.0 / 12f64.sqrt()),
        // sxy = 0 by symmetry
        ("symmetric", vec![-1.0, 0.0, 1.0], vec![1.0, 0.0, 1.0], 0.0),
        // sxy = 4, sxx = 5, syy = 5
        ("hand 4/5", vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 2.0, 1.0, 3.0], 0.8),
    ];
    for (name, x, y, expected) in cases {
        rows.push(row("pearson", name.into(), expected, pearson(&x, &y).unwrap_or(f64::NAN)));
    }
}

fn sg_lsg(rows: &mut Vec<OracleRow>) {
    let cases: [(&str, Vec<f64>, f64); 5] = [
        ("mean at centre", vec![2.0, 4.0, 6.0], 0.0),
        ("mean at quarter", vec![0.0, 0.0, 0.0, 4.0], -0.5),
        ("flat", vec![5.0, 5.0], 0.0),
        // mean 7, range [1, 10]: 2*6/9 - 1
        ("hand 1/3", vec![1.0, 10.0, 10.0], 1.0 / 3.0),
        // mean 4, range [0, 10]: 2*0.4 - 1
        ("hand -1/5", vec![0.0, 2.0, 10.0], -0.2),
    ];
    for (name, xs, expected) in cases {
        rows.push(row("update_sg_lsg_weight", name.into(), expected, update_sg_lsg_weight(&xs).unwrap_or(f64::NAN)));
    }
}

fn lsg_op(rows: &mut Vec<OracleRow>) {
    // sigmoid(x) = (1 + tanh(x / 2)) / 2
    let cases = [
        ([100.0, 10.0, 2.0], [80.0, 12.0, 3.0], Lsg::Energy, 0.2),
        ([100.0, 10.0, 2.0], [80.0, 12.0, 3.0], Lsg::Throughput, 0.2),
        ([100.0, 10.0, 2.0], [80.0, 12.0, 3.0], Lsg::Delay, -0.5),
        ([50.0, 1.0, 1.0], [50.0, 1.0, 1.0], Lsg::Energy, 0.0),
        ([10.0, 4.0, 1.0], [30.0, 1.0, 0.25], Lsg::Throughput, -0.75),
    ];
    for (desired, actual, lsg, er) in cases {
        let t = ObjectiveTargets::new(desired, actual).expect("positive targets");
        let expected = 0.5 * (1.0 + (er / 2.0f64).tanh());
        rows.push(row(
            "update_lsg_op_weight",
            format!("{lsg:?} er={er}"),
            expected,
            update_lsg_op_weight(&t, lsg, -1.0, 1.0),
        ));
    }
}

fn reward(rows: &mut Vec<OracleRow>) {
    let mut w = MetricWindow::new(10);
    for (e, c, t) in [(10.0, 1.0, 1.0), (20.0, 5.0, 3.0), (15.0, 3.0, 2.0)] {
        w.push(e, c, Some(t), 1);
    }
    let ones = RewardWeights::default();
    let heavy = RewardWeights {
        throughput: 2.0,
        energy: 1.0,
        delay: 1.0,
    };
    let cases = [
        ("best", (10.0, 5.0, 1.0), ones, 1.0),
        ("worst", (20.0, 1.0, 3.0), ones, -2.0),
        ("all minima", (10.0, 1.0, 1.0), ones, 0.0),
        // norms c=0.5, e=0.25, t=0.25
        ("w=(2,1,1)", (12.5, 3.0, 1.5), heavy, 0.5),
        // norms c=0.75, e=0.5, t=0.5
        ("midpoints", (15.0, 4.0, 2.0), ones, -0.25),
    ];
    for (name, (e, c, t), weights, expected) in cases {
        let avg = StepAverages {
            energy_w: e,
            throughput_bps: c,
            delay_ttis: t,
            delay_carried: false,
        };
        rows.push(row("compute_reward", name.into(), expected, compute_reward(&w, &avg, &weights).unwrap_or(f64::NAN)));
    }
}

fn bellman(rows: &mut Vec<OracleRow>) {
    let cases = [
        ("terminal", 0.7, 100.0, 0.9, true, 0.7),
        ("gamma 0", 0.3, 100.0, 0.0, false, 0.3),
        ("1 + 0.9*2", 1.0, 2.0, 0.9, false, 2.8),
        ("negative", -1.0, -4.0, 0.5, false, -3.0),
        ("gamma 1", 0.25, 0.75, 1.0, false, 1.0),
    ];
    for (name, r, q, g, term, expected) in cases {
        rows.push(row("bellman_target", name.into(), expected, bellman_target(r, q, g, term)));
    }
}

pub fn run_all() -> Vec<OracleRow> {
    let mut rows = Vec::new();
    path_loss(&mut rows);
    antenna_gain(&mut rows);
    bs_power(&mut rows);
    pearson_cases(&mut rows);
    sg_lsg(&mut rows);
    lsg_op(&mut rows);
    reward(&mut rows);
    bellman(&mut rows);
    rows
}
