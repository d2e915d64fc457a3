//! Time/space-dependent coefficients `a0`, `a1`, `a2` of the logistic source.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoefficientLabel {
    A0,
    A1,
    A2,
}

impl fmt::Display for CoefficientLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CoefficientLabel::A0 => "a0",
            CoefficientLabel::A1 => "a1",
            CoefficientLabel::A2 => "a2",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trig {
    Cos,
    Sin,
}

impl Trig {
    fn apply(self, arg: f64) -> f64 {
        match self {
            Trig::Cos => arg.cos(),
            Trig::Sin => arg.sin(),
        }
    }
}

/// `amplitude * func(omega_t * t + wave . x + phase)`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTerm {
    pub amplitude: f64,
    pub func: Trig,
    #[serde(default)]
    pub omega_t: f64,
    #[serde(default)]
    pub wave: [f64; 2],
    #[serde(default)]
    pub phase: f64,
}

impl TrigTerm {
    fn eval(&self, t: f64, x: [f64; 2]) -> f64 {
        let arg = self.omega_t * t + self.wave[0] * x[0] + self.wave[1] * x[1] + self.phase;
        self.amplitude * self.func.apply(arg)
    }
}

/// `amplitude * func(frequency * s + phase)` in a single variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Harmonic {
    pub amplitude: f64,
    pub func: Trig,
    pub frequency: f64,
    #[serde(default)]
    pub phase: f64,
}

/// A function of one real variable, used as a factor of a separable field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum Univariate {
    /// `c[0] + c[1] s + c[2] s^2 + ...`
    Polynomial { coefficients: Vec<f64> },
    Trig {
        #[serde(default)]
        offset: f64,
        terms: Vec<Harmonic>,
    },
}

impl Univariate {
    pub fn constant(c: f64) -> Self {
        Univariate::Polynomial {
            coefficients: vec![c],
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self {
            // Horner
            Univariate::Polynomial { coefficients } => {
                coefficients.iter().rev().fold(0.0, |acc, &c| acc * s + c)
            }
            Univariate::Trig { offset, terms } => terms.iter().fold(*offset, |acc, h| {
                acc + h.amplitude * h.func.apply(h.frequency * s + h.phase)
            }),
        }
    }

    fn is_constant(&self) -> bool {
        match self {
            Univariate::Polynomial { coefficients } => {
                coefficients.iter().skip(1).all(|&c| c == 0.0)
            }
            Univariate::Trig { terms, .. } => {
                terms.iter().all(|h| h.amplitude == 0.0 || h.frequency == 0.0)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Multilinear in space, linear in time.
    #[default]
    Linear,
    /// Nearest sample in space and time.
    Nearest,
}

/// Samples `values[t][j][i]` on tensor nodes, flattened with `i` fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table {
    pub times: Vec<f64>,
    /// Node coordinates per spatial axis (one or two axes).
    pub nodes: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    #[serde(default)]
    pub interpolation: Interpolation,
}

const COVERAGE_SLACK: f64 = 1e-12;

/// Bracketing interval and weight of the upper node.
fn bracket(nodes: &[f64], s: f64) -> Option<(usize, f64)> {
    let (first, last) = (nodes[0], nodes[nodes.len() - 1]);
    let span = (last - first).abs().max(1.0);
    if s < first - COVERAGE_SLACK * span || s > last + COVERAGE_SLACK * span {
        return None;
    }
    if nodes.len() == 1 {
        return Some((0, 0.0));
    }
    let s = s.clamp(first, last);
    let k = match nodes.partition_point(|&n| n <= s) {
        0 => 0,
        p => (p - 1).min(nodes.len() - 2),
    };
    let w = (s - nodes[k]) / (nodes[k + 1] - nodes[k]);
    Some((k, w))
}

impl Table {
    fn validate(&self) -> Result<(), String> {
        if self.times.is_empty() {
            return Err("table needs at least one time sample".into());
        }
        if self.nodes.is_empty() || self.nodes.len() > 2 {
            return Err("table needs node lists for one or two axes".into());
        }
        let strictly_increasing = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
        if !strictly_increasing(&self.times) {
            return Err("table times must be strictly increasing".into());
        }
        for (k, n) in self.nodes.iter().enumerate() {
            if n.is_empty() || !strictly_increasing(n) {
                return Err(format!(
                    "table nodes on axis {k} must be nonempty and strictly increasing"
                ));
            }
        }
        let expected = self.times.len() * self.nodes.iter().map(Vec::len).product::<usize>();
        if self.values.len() != expected {
            return Err(format!(
                "table has {} values, expected {expected}",
                self.values.len()
            ));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err("table values must be finite".into());
        }
        Ok(())
    }

    fn spatial_len(&self) -> usize {
        self.nodes.iter().map(Vec::len).product()
    }

    fn at(&self, tk: usize, i: usize, j: usize) -> f64 {
        let nx = self.nodes[0].len();
        self.values[tk * self.spatial_len() + j * nx + i]
    }

    fn eval(&self, t: f64, x: [f64; 2]) -> Option<f64> {
        let (tk, tw) = bracket(&self.times, t)?;
        let (ik, iw) = bracket(&self.nodes[0], x[0])?;
        let (jk, jw) = match self.nodes.get(1) {
            Some(ys) => bracket(ys, x[1])?,
            None => (0, 0.0),
        };
        let round = |w: f64| if w < 0.5 { 0.0 } else { 1.0 };
        let (tw, iw, jw) = match self.interpolation {
            Interpolation::Linear => (tw, iw, jw),
            Interpolation::Nearest => (round(tw), round(iw), round(jw)),
        };
        let nt = self.times.len();
        let nx = self.nodes[0].len();
        let ny = self.nodes.get(1).map_or(1, Vec::len);
        let mut acc = 0.0;
        for (dt, wt) in [(0, 1.0 - tw), (1, tw)] {
            if wt == 0.0 || tk + dt >= nt {
                continue;
            }
            for (dj, wy) in [(0, 1.0 - jw), (1, jw)] {
                if wy == 0.0 || jk + dj >= ny {
                    continue;
                }
                for (di, wx) in [(0, 1.0 - iw), (1, iw)] {
                    if wx == 0.0 || ik + di >= nx {
                        continue;
                    }
                    acc += wt * wy * wx * self.at(tk + dt, ik + di, jk + dj);
                }
            }
        }
        Some(acc)
    }

    /// Whether the samples cover `[0, L_k]` on every axis and `[t_a, t_b]`.
    pub fn covers(&self, lengths: &[f64], window: (f64, f64)) -> bool {
        let within = |nodes: &[f64], lo: f64, hi: f64| {
            bracket(nodes, lo).is_some() && bracket(nodes, hi).is_some()
        };
        within(&self.times, window.0, window.1)
            && self.nodes.len() == lengths.len()
            && self
                .nodes
                .iter()
                .zip(lengths)
                .all(|(n, &l)| within(n, 0.0, l))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientKind {
    Constant {
        value: f64,
    },
    /// `time(t) * space[0](x1) * space[1](x2)`
    Separable {
        time: Univariate,
        space: Vec<Univariate>,
    },
    TrigSum {
        #[serde(default)]
        offset: f64,
        terms: Vec<TrigTerm>,
    },
    Tabulated(Table),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientField {
    pub label: CoefficientLabel,
    pub kind: CoefficientKind,
}

impl CoefficientField {
    pub fn new(label: CoefficientLabel, kind: CoefficientKind) -> Result<Self, ModelError> {
        let field = CoefficientField { label, kind };
        field.validate()?;
        Ok(field)
    }

    pub fn constant(label: CoefficientLabel, value: f64) -> Self {
        CoefficientField {
            label,
            kind: CoefficientKind::Constant { value },
        }
    }

    /// `offset + sum of terms`
    pub fn trig_sum(label: CoefficientLabel, offset: f64, terms: Vec<TrigTerm>) -> Self {
        CoefficientField {
            label,
            kind: CoefficientKind::TrigSum { offset, terms },
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        let field = format!("coefficients.{}", self.label);
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(ModelError::invalid(&field, format!("{what} must be finite")))
            }
        };
        match &self.kind {
            CoefficientKind::Constant { value } => finite(*value, "value"),
            CoefficientKind::TrigSum { offset, terms } => {
                finite(*offset, "offset")?;
                for term in terms {
                    finite(term.amplitude, "amplitude")?;
                    finite(term.omega_t, "omega_t")?;
                    finite(term.phase, "phase")?;
                    finite(term.wave[0], "wave")?;
                    finite(term.wave[1], "wave")?;
                }
                Ok(())
            }
            CoefficientKind::Separable { space, .. } => {
                if space.is_empty() || space.len() > 2 {
                    return Err(ModelError::invalid(
                        &field,
                        "separable coefficient needs one or two spatial factors",
                    ));
                }
                Ok(())
            }
            CoefficientKind::Tabulated(table) => table
                .validate()
                .map_err(|m| ModelError::invalid(&field, m)),
        }
    }

    /// `a_i(t, x)`. Only tabulated fields can fail, outside their coverage.
    pub fn evaluate(&self, t: f64, x: [f64; 2]) -> Result<f64, ModelError> {
        match &self.kind {
            CoefficientKind::Constant { value } => Ok(*value),
            CoefficientKind::TrigSum { offset, terms } => {
                Ok(terms.iter().fold(*offset, |acc, term| acc + term.eval(t, x)))
            }
            CoefficientKind::Separable { time, space } => {
                let mut v = time.eval(t);
                for (k, g) in space.iter().enumerate() {
                    v *= g.eval(x[k]);
                }
                Ok(v)
            }
            CoefficientKind::Tabulated(table) => {
                table
                    .eval(t, x)
                    .ok_or(ModelError::EvaluationOutOfRange {
                        label: self.label,
                        t,
                        x,
                    })
            }
        }
    }

    pub fn constant_value(&self) -> Option<f64> {
        match self.kind {
            CoefficientKind::Constant { value } => Some(value),
            _ => None,
        }
    }

    /// True when the field does not depend on `t`.
    pub fn is_autonomous(&self) -> bool {
        match &self.kind {
            CoefficientKind::Constant { .. } => true,
            CoefficientKind::TrigSum { terms, .. } => {
                terms.iter().all(|t| t.omega_t == 0.0 || t.amplitude == 0.0)
            }
            CoefficientKind::Separable { time, .. } => time.is_constant(),
            CoefficientKind::Tabulated(table) => table.times.len() == 1,
        }
    }
}

/// The three logistic-source coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CoefficientsSpec", into = "CoefficientsSpec")]
pub struct Coefficients {
    pub a0: CoefficientField,
    pub a1: CoefficientField,
    pub a2: CoefficientField,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsSpec {
    pub a0: CoefficientKind,
    pub a1: CoefficientKind,
    pub a2: CoefficientKind,
}

impl TryFrom<CoefficientsSpec> for Coefficients {
    type Error = ModelError;

    fn try_from(s: CoefficientsSpec) -> Result<Self, Self::Error> {
        Ok(Coefficients {
            a0: CoefficientField::new(CoefficientLabel::A0, s.a0)?,
            a1: CoefficientField::new(CoefficientLabel::A1, s.a1)?,
            a2: CoefficientField::new(CoefficientLabel::A2, s.a2)?,
        })
    }
}

impl From<Coefficients> for CoefficientsSpec {
    fn from(c: Coefficients) -> Self {
        CoefficientsSpec {
            a0: c.a0.kind,
            a1: c.a1.kind,
            a2: c.a2.kind,
        }
    }
}

impl Coefficients {
    pub fn constant(a0: f64, a1: f64, a2: f64) -> Self {
        Coefficients {
            a0: CoefficientField::constant(CoefficientLabel::A0, a0),
            a1: CoefficientField::constant(CoefficientLabel::A1, a1),
            a2: CoefficientField::constant(CoefficientLabel::A2, a2),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &CoefficientField> {
        [&self.a0, &self.a1, &self.a2].into_iter()
    }

    /// `(a0, a1, a2)` when all three are constant.
    pub fn constants(&self) -> Option<(f64, f64, f64)> {
        Some((
            self.a0.constant_value()?,
            self.a1.constant_value()?,
            self.a2.constant_value()?,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_is_constant() {
        let c = CoefficientField::constant(CoefficientLabel::A0, 2.0);
        for &(t, x) in &[(0.0, [0.1, 0.0]), (-50.0, [0.9, 0.3]), (1e6, [0.5, 0.5])] {
            assert_eq!(c.evaluate(t, x).unwrap(), 2.0);
        }
    }

    #[test]
    fn trig_sum_in_time() {
        let c = CoefficientField::trig_sum(
            CoefficientLabel::A1,
            1.0,
            vec![TrigTerm {
                amplitude: 0.5,
                func: Trig::Cos,
                omega_t: 1.0,
                wave: [0.0, 0.0],
                phase: 0.0,
            }],
        );
        assert!((c.evaluate(PI, [0.3, 0.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(!c.is_autonomous());
    }

    #[test]
    fn separable_product() {
        let c = CoefficientField::new(
            CoefficientLabel::A0,
            CoefficientKind::Separable {
                time: Univariate::Polynomial {
                    coefficients: vec![1.0, 1.0],
                },
                space: vec![Univariate::Polynomial {
                    coefficients: vec![0.0, 1.0],
                }],
            },
        )
        .unwrap();
        assert_eq!(c.evaluate(1.0, [0.25, 0.0]).unwrap(), 0.5);
    }

    fn table_1d() -> Table {
        Table {
            times: vec![0.0, 1.0],
            nodes: vec![vec![0.0, 0.5, 1.0]],
            values: vec![0.0, 1.0, 2.0, 10.0, 11.0, 12.0],
            interpolation: Interpolation::Linear,
        }
    }

    #[test]
    fn tabulated_linear_in_space_and_time() {
        let c = CoefficientField::new(CoefficientLabel::A2, CoefficientKind::Tabulated(table_1d()))
            .unwrap();
        assert!((c.evaluate(0.0, [0.25, 0.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!((c.evaluate(0.5, [0.25, 0.0]).unwrap() - 5.5).abs() < 1e-14);
        assert!((c.evaluate(1.0, [1.0, 0.0]).unwrap() - 12.0).abs() < 1e-14);
    }

    #[test]
    fn tabulated_bilinear_2d() {
        // f = 1 + 2x + 3y + xy is reproduced exactly by bilinear interpolation
        let xs = vec![0.0, 0.4, 1.0];
        let ys = vec![0.0, 2.0];
        let mut values = Vec::new();
        for &y in &ys {
            for &x in &xs {
                values.push(1.0 + 2.0 * x + 3.0 * y + x * y);
            }
        }
        let table = Table {
            times: vec![0.0],
            nodes: vec![xs, ys],
            values,
            interpolation: Interpolation::Linear,
        };
        let c = CoefficientField::new(CoefficientLabel::A0, CoefficientKind::Tabulated(table))
            .unwrap();
        let (x, y) = (0.7, 1.3);
        let exact = 1.0 + 2.0 * x + 3.0 * y + x * y;
        assert!((c.evaluate(0.0, [x, y]).unwrap() - exact).abs() < 1e-13);
        assert!(c.is_autonomous());
    }

    #[test]
    fn tabulated_out_of_range() {
        let c = CoefficientField::new(CoefficientLabel::A2, CoefficientKind::Tabulated(table_1d()))
            .unwrap();
        assert!(matches!(
            c.evaluate(2.0, [0.5, 0.0]),
            Err(ModelError::EvaluationOutOfRange { .. })
        ));
        assert!(matches!(
            c.evaluate(0.5, [1.5, 0.0]),
            Err(ModelError::EvaluationOutOfRange { .. })
        ));
    }

    #[test]
    fn tabulated_nearest() {
        let mut table = table_1d();
        table.interpolation = Interpolation::Nearest;
        let c =
            CoefficientField::new(CoefficientLabel::A2, CoefficientKind::Tabulated(table)).unwrap();
        assert_eq!(c.evaluate(0.4, [0.3, 0.0]).unwrap(), 1.0);
        assert_eq!(c.evaluate(0.6, [0.1, 0.0]).unwrap(), 10.0);
    }

    #[test]
    fn malformed_table_rejected() {
        let mut table = table_1d();
        table.values.pop();
        assert!(CoefficientField::new(CoefficientLabel::A0, CoefficientKind::Tabulated(table)).is_err());
    }

    #[test]
    fn coverage() {
        let t = table_1d();
        assert!(t.covers(&[1.0], (0.0, 1.0)));
        assert!(!t.covers(&[1.0], (0.0, 2.0)));
        assert!(!t.covers(&[2.0], (0.0, 1.0)));
    }

    #[test]
    fn config_roundtrip_through_toml() {
        let src = r#"
            [a0]
            kind = "trig_sum"
            offset = 1.0
            terms = [{ amplitude = 0.2, func = "sin", omega_t = 1.0 }]
            [a1]
            kind = "constant"
            value = 2.0
            [a2]
            kind = "separable"
            time = { form = "polynomial", coefficients = [1.0, 1.0] }
            space = [{ form = "trig", offset = 0.0, terms = [{ amplitude = 1.0, func = "cos", frequency = 3.0 }] }]
        "#;
        let c: Coefficients = toml::from_str(src).unwrap();
        assert_eq!(c.a1.constant_value(), Some(2.0));
        assert_eq!(c.a2.label, CoefficientLabel::A2);
        let v = c.a0.evaluate(PI / 2.0, [0.0, 0.0]).unwrap();
        assert!((v - 1.2).abs() < 1e-15);
    }
}
