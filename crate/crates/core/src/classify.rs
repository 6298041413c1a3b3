//! The dynamical taxonomy of cyclic subgroups, element specifications, and
//! canonical Jordan representatives.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmat::HMat3;
use crate::quat::Quaternion;
use crate::spectra::{self, EigenClass, CLUSTER_TOL, RANK_TOL};

/// Relative tolerance for modulus relations in structured specs.
const MOD_TOL: f64 = 1e-9;

/// An eigenvalue angle in turns: `e^{2πi·angle}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum AngleSpec {
    Rational { p: i64, q: i64 },
    Irrational { value: f64, label: String },
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn lcm(a: i64, b: i64) -> i64 {
    a / gcd(a, b) * b
}

impl AngleSpec {
    /// Rational angle reduced to lowest terms with `p ∈ [0, q)`.
    pub fn rational(p: i64, q: i64) -> Result<Self> {
        if q <= 0 {
            return Err(Error::Validation(format!("angle denominator must be positive, got {q}")));
        }
        let g = gcd(p, q).max(1);
        let (p, q) = (p / g, q / g);
        Ok(AngleSpec::Rational { p: p.rem_euclid(q), q })
    }

    pub fn irrational(value: f64, label: &str) -> Result<Self> {
        if !(0.0..1.0).contains(&value) {
            return Err(Error::Validation(format!("irrational angle {value} must lie in [0,1)")));
        }
        Ok(AngleSpec::Irrational { value, label: label.to_string() })
    }

    pub fn zero() -> Self {
        AngleSpec::Rational { p: 0, q: 1 }
    }

    /// Validates and reduces a deserialized angle.
    pub fn normalized(&self) -> Result<Self> {
        match self {
            AngleSpec::Rational { p, q } => AngleSpec::rational(*p, *q),
            AngleSpec::Irrational { value, label } => AngleSpec::irrational(*value, label),
        }
    }

    pub fn turns(&self) -> f64 {
        match self {
            AngleSpec::Rational { p, q } => (*p as f64 / *q as f64).rem_euclid(1.0),
            AngleSpec::Irrational { value, .. } => *value,
        }
    }

    pub fn is_rational(&self) -> bool {
        matches!(self, AngleSpec::Rational { .. })
    }

    /// Angle of the class representative, in `[0, 1/2]` turns.
    pub fn folded(&self) -> f64 {
        let t = self.turns();
        t.min(1.0 - t)
    }

    /// Equality of eigenvalue classes `e^{±2πiθ}`.
    pub fn same_class(&self, other: &AngleSpec) -> bool {
        match (self, other) {
            (AngleSpec::Rational { p: a, q: b }, AngleSpec::Rational { p: c, q: d }) => {
                // a/b ≡ ±c/d mod 1
                (a * d - c * b).rem_euclid(b * d) == 0 || (a * d + c * b).rem_euclid(b * d) == 0
            }
            _ => (self.folded() - other.folded()).abs() <= 1e-15,
        }
    }

    /// True when `e^{2πiθ} = 1`.
    pub fn is_zero(&self) -> bool {
        match self {
            AngleSpec::Rational { p, q } => p.rem_euclid(*q) == 0,
            AngleSpec::Irrational { .. } => false,
        }
    }

    /// True when `e^{2πiθ}` is real (`θ ∈ {0, 1/2}`).
    pub fn is_real(&self) -> bool {
        match self {
            AngleSpec::Rational { p, q } => (2 * p).rem_euclid(*q) == 0,
            AngleSpec::Irrational { .. } => false,
        }
    }
}

/// `modulus·e^{2πi·angle}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenParam {
    #[serde(default = "one")]
    pub modulus: f64,
    #[serde(default = "AngleSpec::zero")]
    pub angle: AngleSpec,
}

fn one() -> f64 {
    1.0
}

impl EigenParam {
    pub fn new(modulus: f64, angle: AngleSpec) -> Self {
        EigenParam { modulus, angle }
    }

    pub fn unit(angle: AngleSpec) -> Self {
        EigenParam::new(1.0, angle)
    }

    pub fn real(modulus: f64) -> Self {
        EigenParam::new(modulus, AngleSpec::zero())
    }

    pub fn value(&self) -> Complex64 {
        Complex64::from_polar(self.modulus, std::f64::consts::TAU * self.angle.turns())
    }

    pub fn quaternion(&self) -> Quaternion {
        Quaternion::from_complex(self.value())
    }

    fn is_unit(&self) -> bool {
        (self.modulus - 1.0).abs() <= MOD_TOL
    }

    fn is_one(&self) -> bool {
        self.is_unit() && self.angle.is_zero()
    }

    fn same_class(&self, other: &EigenParam) -> bool {
        same_modulus(self.modulus, other.modulus) && self.angle.same_class(&other.angle)
    }
}

fn same_modulus(a: f64, b: f64) -> bool {
    (a - b).abs() <= MOD_TOL * a.max(b).max(1.0)
}

/// Arrangement of the Jordan representative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    /// `diag(λ, μ, ξ)`.
    Diagonal,
    /// `J(λ,2) ⊕ (ξ)`.
    Block2,
    /// `J(λ,3)`.
    Block3,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<EigenParam>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<EigenParam>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<EigenParam>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coarse {
    Elliptic,
    Loxodromic,
    Parabolic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CompoundType {
    I,
    II,
    III,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HomothetyKind {
    Real,
    Complex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fine {
    RationalElliptic,
    SimpleIrrationalElliptic,
    CompoundIrrationalElliptic(CompoundType),
    RegularLoxodromic,
    Screw,
    Homothety(HomothetyKind),
    LoxoParabolic,
    VerticalTranslation,
    NonVerticalTranslation,
    RationalElliptoParabolic,
    IrrationalElliptoParabolic,
    ElliptoTranslation,
}

impl Fine {
    pub fn coarse(self) -> Coarse {
        use Fine::*;
        match self {
            RationalElliptic | SimpleIrrationalElliptic | CompoundIrrationalElliptic(_) => Coarse::Elliptic,
            RegularLoxodromic | Screw | Homothety(_) | LoxoParabolic => Coarse::Loxodromic,
            _ => Coarse::Parabolic,
        }
    }

    pub fn shape(self) -> Shape {
        use Fine::*;
        match self {
            LoxoParabolic | VerticalTranslation | RationalElliptoParabolic | IrrationalElliptoParabolic => {
                Shape::Block2
            }
            NonVerticalTranslation | ElliptoTranslation => Shape::Block3,
            _ => Shape::Diagonal,
        }
    }

    /// Snake-case name as used in spec files and reports.
    pub fn name(self) -> &'static str {
        use Fine::*;
        match self {
            RationalElliptic => "rational_elliptic",
            SimpleIrrationalElliptic => "simple_irrational_elliptic",
            CompoundIrrationalElliptic(_) => "compound_irrational_elliptic",
            RegularLoxodromic => "regular_loxodromic",
            Screw => "screw",
            Homothety(_) => "homothety",
            LoxoParabolic => "loxo_parabolic",
            VerticalTranslation => "vertical_translation",
            NonVerticalTranslation => "non_vertical_translation",
            RationalElliptoParabolic => "rational_ellipto_parabolic",
            IrrationalElliptoParabolic => "irrational_ellipto_parabolic",
            ElliptoTranslation => "ellipto_translation",
        }
    }

    /// Name including the compound type or homothety kind.
    pub fn label(self) -> String {
        match self {
            Fine::CompoundIrrationalElliptic(t) => format!("compound_irrational_elliptic_{t:?}"),
            Fine::Homothety(HomothetyKind::Real) => "homothety_real".into(),
            Fine::Homothety(HomothetyKind::Complex) => "homothety_complex".into(),
            f => f.name().into(),
        }
    }

    /// Subclasses whose orbits converge at a polynomial rather than geometric rate.
    pub fn polynomial_rate(self) -> bool {
        matches!(
            self,
            Fine::LoxoParabolic
                | Fine::VerticalTranslation
                | Fine::NonVerticalTranslation
                | Fine::RationalElliptoParabolic
                | Fine::IrrationalElliptoParabolic
                | Fine::ElliptoTranslation
        )
    }
}

impl fmt::Display for Fine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Classified element with echoed parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementClass {
    pub coarse: Coarse,
    pub fine: Fine,
    pub shape: Shape,
    pub params: Params,
    /// Extra note on how an edge case was resolved.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case_label: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Confidence {
    Exact,
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructuredSpec {
    pub class: String,
    #[serde(default)]
    pub params: Params,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<Shape>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub matrix: HMat3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum ElementSpec {
    Structured(StructuredSpec),
    Matrix(MatrixSpec),
}

impl ElementSpec {
    /// Parses JSON, reporting the field path of any schema violation.
    pub fn from_json(text: &str) -> Result<Self> {
        let schema = |path: &str, message: String| Error::Schema { path: path.into(), message };
        let mut value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| schema(".", e.to_string()))?;
        let obj = value
            .as_object_mut()
            .ok_or_else(|| schema(".", "spec must be an object".into()))?;
        let mode = obj
            .remove("mode")
            .ok_or_else(|| schema("mode", "missing field `mode`".into()))?;
        // dispatch by hand so field paths survive into error messages
        fn inner<T: serde::de::DeserializeOwned>(v: serde_json::Value) -> Result<T> {
            serde_path_to_error::deserialize(v).map_err(|e| Error::Schema {
                path: e.path().to_string(),
                message: e.into_inner().to_string(),
            })
        }
        match mode.as_str() {
            Some("structured") => Ok(ElementSpec::Structured(inner(value)?)),
            Some("matrix") => Ok(ElementSpec::Matrix(inner(value)?)),
            _ => Err(schema("mode", format!("expected `structured` or `matrix`, got {mode}"))),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("specs serialize")
    }

    pub fn structured(class: &ElementClass) -> Self {
        ElementSpec::Structured(StructuredSpec {
            class: class.fine.name().into(),
            params: class.params.clone(),
            shape: None,
        })
    }
}

/// Resolves a spec to its class: exact for structured input, heuristic for matrices.
pub fn classify_spec(spec: &ElementSpec) -> Result<(ElementClass, Confidence)> {
    match spec {
        ElementSpec::Structured(s) => Ok((classify_fine(s)?, Confidence::Exact)),
        ElementSpec::Matrix(m) => classify_fine_numeric(&m.matrix, 1e-9, 1_000_000),
    }
}

/// Generator matrix of a spec: the canonical form or the normalized matrix.
pub fn spec_matrix(spec: &ElementSpec) -> Result<HMat3> {
    match spec {
        ElementSpec::Structured(s) => canonical_form(&classify_fine(s)?),
        ElementSpec::Matrix(m) => m.matrix.normalize_to_sl(),
    }
}

fn family_of(name: &str) -> Option<(Option<Fine>, Option<Coarse>)> {
    use Fine::*;
    let fine = match name {
        "rational_elliptic" => RationalElliptic,
        "simple_irrational_elliptic" => SimpleIrrationalElliptic,
        "compound_irrational_elliptic" => CompoundIrrationalElliptic(CompoundType::I),
        "regular_loxodromic" => RegularLoxodromic,
        "screw" | "screw_loxodromic" => Screw,
        "homothety" => Homothety(HomothetyKind::Real),
        "loxo_parabolic" => LoxoParabolic,
        "vertical_translation" => VerticalTranslation,
        "non_vertical_translation" => NonVerticalTranslation,
        "rational_ellipto_parabolic" => RationalElliptoParabolic,
        "irrational_ellipto_parabolic" => IrrationalElliptoParabolic,
        "ellipto_translation" => ElliptoTranslation,
        "elliptic" => return Some((None, Some(Coarse::Elliptic))),
        "loxodromic" => return Some((None, Some(Coarse::Loxodromic))),
        "parabolic" | "ellipto_parabolic" => return Some((None, Some(Coarse::Parabolic))),
        _ => return None,
    };
    Some((Some(fine), None))
}

fn need<'a>(p: &'a Option<EigenParam>, name: &str, class: &str) -> Result<&'a EigenParam> {
    p.as_ref().ok_or_else(|| Error::Validation(format!("{class} requires parameter `{name}`")))
}

fn checked(p: &EigenParam, name: &str) -> Result<EigenParam> {
    if !(p.modulus.is_finite() && p.modulus > 0.0) {
        return Err(Error::Validation(format!("`{name}.modulus` must be a positive real, got {}", p.modulus)));
    }
    Ok(EigenParam::new(p.modulus, p.angle.normalized()?))
}

/// Exact subclass of a structured spec. A fine class name is validated
/// against the parameters; a family name (`elliptic`, `loxodromic`,
/// `ellipto_parabolic`) lets the parameters decide.
pub fn classify_fine(spec: &StructuredSpec) -> Result<ElementClass> {
    let (named, family) = family_of(&spec.class)
        .ok_or_else(|| Error::Validation(format!("unknown class `{}`", spec.class)))?;
    let shape = match (named, spec.shape) {
        (Some(f), Some(s)) if f.shape() != s => {
            return Err(Error::Validation(format!("{} requires shape {:?}", f.name(), f.shape())))
        }
        (Some(f), _) => f.shape(),
        (None, Some(s)) => s,
        (None, None) => match family {
            Some(Coarse::Parabolic) if spec.params.mu.is_none() && spec.params.xi.is_none() => Shape::Block3,
            Some(Coarse::Parabolic) => Shape::Block2,
            _ => Shape::Diagonal,
        },
    };
    let mut params = Params::default();
    let unit_default = || EigenParam::real(1.0);
    let (fine, case_label) = match shape {
        Shape::Diagonal => {
            let l = checked(need(&spec.params.lambda, "lambda", &spec.class)?, "lambda")?;
            let m = match (&spec.params.mu, named) {
                (None, Some(Fine::Homothety(_))) => l.clone(),
                (mu, _) => checked(need(mu, "mu", &spec.class)?, "mu")?,
            };
            let x = checked(need(&spec.params.xi, "xi", &spec.class)?, "xi")?;
            let r = classify_diagonal(&l, &m, &x)?;
            params.lambda = Some(l);
            params.mu = Some(m);
            params.xi = Some(x);
            r
        }
        Shape::Block2 => {
            let l = checked(spec.params.lambda.as_ref().unwrap_or(&unit_default()), "lambda")?;
            let x = checked(spec.params.xi.as_ref().unwrap_or(&unit_default()), "xi")?;
            if spec.params.mu.is_some() {
                return Err(Error::Validation("J(λ,2)⊕ξ takes no `mu`".into()));
            }
            let f = classify_block2(&l, &x)?;
            params.lambda = Some(l);
            params.xi = Some(x);
            (f, None)
        }
        Shape::Block3 => {
            let l = checked(spec.params.lambda.as_ref().unwrap_or(&unit_default()), "lambda")?;
            if spec.params.mu.is_some() || spec.params.xi.is_some() {
                return Err(Error::Validation("J(λ,3) takes only `lambda`".into()));
            }
            if !l.is_unit() {
                return Err(Error::Validation(format!(
                    "J(λ,3) in SL(3,ℍ) needs |λ| = 1, got {}",
                    l.modulus
                )));
            }
            let f = if l.angle.is_zero() { Fine::NonVerticalTranslation } else { Fine::ElliptoTranslation };
            params.lambda = Some(l);
            (f, None)
        }
    };
    if let Some(n) = named {
        if n.name() != fine.name() {
            return Err(Error::Validation(mismatch_reason(n, fine)));
        }
    }
    if let Some(c) = family {
        if c != fine.coarse() {
            return Err(Error::Validation(format!(
                "parameters describe a {:?} element ({}), not {:?}",
                fine.coarse(),
                fine.name(),
                c
            )));
        }
    }
    Ok(ElementClass { coarse: fine.coarse(), fine, shape, params, case_label })
}

fn mismatch_reason(named: Fine, derived: Fine) -> String {
    use Fine::*;
    let why = match named {
        RationalElliptic => "all angles rational and all moduli 1",
        SimpleIrrationalElliptic => "α = β = γ irrational and all moduli 1",
        CompoundIrrationalElliptic(_) => "unit moduli, not all angles rational, not all equal",
        RegularLoxodromic => "|λ| < |μ| < |ξ|",
        Screw => "|λ| = |μ| ≠ 1, λ ≠ μ, |ξ| = 1/|λ|²",
        Homothety(_) => "λ = μ, |λ| ≠ 1, |ξ| = 1/|λ|²",
        LoxoParabolic => "|λ| ≠ 1, |ξ| = 1/|λ|²",
        VerticalTranslation => "λ = ξ = 1",
        NonVerticalTranslation => "λ = 1",
        RationalElliptoParabolic => "e^{2πiα} ≠ 1 with α, β rational",
        IrrationalElliptoParabolic => "e^{2πiα} ≠ 1 with α or β irrational",
        ElliptoTranslation => "e^{2πiα} ≠ 1",
    };
    format!("{} requires {why}; parameters describe {}", named.name(), derived.label())
}

fn check_det(mods: &[f64]) -> Result<()> {
    let prod: f64 = mods.iter().product();
    if (prod - 1.0).abs() > MOD_TOL {
        return Err(Error::Validation(format!(
            "product of moduli must be 1 for a lift in SL(3,ℍ), got {prod}"
        )));
    }
    Ok(())
}

fn elliptic_subclass(angles: [&AngleSpec; 3]) -> (Fine, Option<String>) {
    let rational = angles.iter().filter(|a| a.is_rational()).count();
    if rational == 3 {
        return (Fine::RationalElliptic, None);
    }
    let all_equal = angles[0].same_class(angles[1]) && angles[1].same_class(angles[2]);
    if rational == 0 && all_equal {
        return (Fine::SimpleIrrationalElliptic, None);
    }
    let t = match rational {
        2 => CompoundType::I,
        1 => CompoundType::II,
        _ => CompoundType::III,
    };
    let irr: Vec<&&AngleSpec> = angles.iter().filter(|a| !a.is_rational()).collect();
    let coincide = irr.len() >= 2
        && (0..irr.len()).any(|i| (i + 1..irr.len()).any(|j| irr[i].same_class(irr[j])));
    let label = (t == CompoundType::III && coincide)
        .then(|| "type III with two coinciding irrational angles".to_string());
    (Fine::CompoundIrrationalElliptic(t), label)
}

fn classify_diagonal(l: &EigenParam, m: &EigenParam, x: &EigenParam) -> Result<(Fine, Option<String>)> {
    check_det(&[l.modulus, m.modulus, x.modulus])?;
    if l.is_unit() && m.is_unit() && x.is_unit() {
        return Ok(elliptic_subclass([&l.angle, &m.angle, &x.angle]));
    }
    let (a, b, c) = (l.modulus, m.modulus, x.modulus);
    if a < b && b < c && !same_modulus(a, b) && !same_modulus(b, c) {
        return Ok((Fine::RegularLoxodromic, None));
    }
    if same_modulus(a, b) && !l.is_unit() {
        if l.same_class(m) {
            let kind = if l.angle.is_real() { HomothetyKind::Real } else { HomothetyKind::Complex };
            return Ok((Fine::Homothety(kind), None));
        }
        return Ok((Fine::Screw, None));
    }
    Err(Error::Validation(format!(
        "diagonal loxodromic moduli ({a}, {b}, {c}) must be strictly increasing (regular) \
         or have the equal pair first (screw, homothety)"
    )))
}

fn classify_block2(l: &EigenParam, x: &EigenParam) -> Result<Fine> {
    check_det(&[l.modulus, l.modulus, x.modulus])?;
    if !l.is_unit() {
        return Ok(Fine::LoxoParabolic);
    }
    if l.is_one() {
        if x.is_one() {
            return Ok(Fine::VerticalTranslation);
        }
        return Err(Error::Validation(
            "J(1,2)⊕ξ with ξ ≠ 1 is not covered by the taxonomy".into(),
        ));
    }
    if l.angle.is_rational() && x.angle.is_rational() {
        Ok(Fine::RationalElliptoParabolic)
    } else {
        Ok(Fine::IrrationalElliptoParabolic)
    }
}

/// Loxodromic iff a modulus differs from 1 by more than `tol`; otherwise
/// elliptic iff semisimple.
pub fn classify_coarse(a: &HMat3, tol: f64) -> Result<Coarse> {
    let g = normalized_if_needed(a)?;
    let classes = classes_robust(&g)?;
    if classes.iter().any(|c| (c.modulus - 1.0).abs() > tol) {
        return Ok(Coarse::Loxodromic);
    }
    let j = jordan_robust(&g)?;
    Ok(if j.is_semisimple() { Coarse::Elliptic } else { Coarse::Parabolic })
}

fn normalized_if_needed(a: &HMat3) -> Result<HMat3> {
    let d = a.det_h()?;
    if (d - 1.0).abs() <= 1e-6 {
        Ok(*a)
    } else {
        a.normalize_to_sl()
    }
}

fn classes_robust(a: &HMat3) -> Result<Vec<EigenClass>> {
    spectra::eigen_classes_tol(a, CLUSTER_TOL)
}

fn jordan_robust(a: &HMat3) -> Result<spectra::JordanStructure> {
    spectra::jordan_structure_with(a, RANK_TOL, CLUSTER_TOL)
}

/// Decides rationality of `x` from its continued-fraction convergents: the
/// first convergent `p/q` with `q ≤ max_den` and `|x − p/q| ≤ tol/q²`.
/// Scaling by `q²` matters: every real has convergents within `1/q²`, so a
/// bare residual test would accept e.g. the golden ratio at `q = 832040`.
pub fn rational_approx(x: f64, tol: f64, max_den: i64) -> Option<(i64, i64)> {
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a.abs() > 1e15 {
            break;
        }
        let a = a as i64;
        let h2 = a.checked_mul(h1)?.checked_add(h0)?;
        let k2 = a.checked_mul(k1)?.checked_add(k0)?;
        if k2 > max_den {
            return None;
        }
        let qf = k2 as f64;
        if (x - h2 as f64 / qf).abs() <= tol / (qf * qf) {
            return Some((h2, k2));
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = r - a as f64;
        if frac == 0.0 {
            break;
        }
        r = 1.0 / frac;
    }
    None
}

fn numeric_angle(c: &EigenClass, tol: f64, max_den: i64) -> Result<AngleSpec> {
    let t = c.argument / std::f64::consts::TAU;
    match rational_approx(t, tol, max_den) {
        Some((p, q)) => AngleSpec::rational(p, q),
        None => AngleSpec::irrational(t.rem_euclid(1.0), "numeric"),
    }
}

/// Subclass of an arbitrary matrix; rationality of angles is decided by
/// [`rational_approx`], so the result is always heuristic.
pub fn classify_fine_numeric(a: &HMat3, tol: f64, max_den: i64) -> Result<(ElementClass, Confidence)> {
    let g = normalized_if_needed(a)?;
    let classes = classes_robust(&g)?;
    let jordan = jordan_robust(&g)?;
    let coarse = classify_coarse(&g, 1e-9)?;
    let param = |c: &EigenClass| -> Result<EigenParam> { Ok(EigenParam::new(c.modulus, numeric_angle(c, tol, max_den)?)) };
    // expand classes by multiplicity, ascending modulus
    let mut expanded: Vec<&EigenClass> = Vec::new();
    for c in &classes {
        for _ in 0..c.algebraic_multiplicity {
            expanded.push(c);
        }
    }
    let sizes = jordan.sizes();
    let spec = match (coarse, sizes.as_slice()) {
        (Coarse::Elliptic, _) | (Coarse::Loxodromic, [1, 1, 1]) => {
            let (l, m, x) = if coarse == Coarse::Loxodromic {
                diagonal_order(&expanded)
            } else {
                (expanded[0], expanded[1], expanded[2])
            };
            StructuredSpec {
                class: if coarse == Coarse::Elliptic { "elliptic" } else { "loxodromic" }.into(),
                params: Params { lambda: Some(param(l)?), mu: Some(param(m)?), xi: Some(param(x)?) },
                shape: Some(Shape::Diagonal),
            }
        }
        (_, [2, 1]) => {
            let big = jordan.blocks.iter().find(|b| b.1 == 2).expect("size-2 block").0;
            let small = jordan.blocks.iter().find(|b| b.1 == 1).expect("size-1 block").0;
            let find = |z: Complex64| classes.iter().find(|c| c.representative == z).expect("class of block");
            StructuredSpec {
                class: if coarse == Coarse::Loxodromic { "loxodromic" } else { "parabolic" }.into(),
                params: Params { lambda: Some(param(find(big))?), mu: None, xi: Some(param(find(small))?) },
                shape: Some(Shape::Block2),
            }
        }
        (_, [3]) => StructuredSpec {
            class: "parabolic".into(),
            params: Params { lambda: Some(param(&classes[0])?), mu: None, xi: None },
            shape: Some(Shape::Block3),
        },
        _ => {
            return Err(Error::Validation(format!(
                "Jordan structure {sizes:?} with coarse type {coarse:?} is outside the taxonomy"
            )))
        }
    };
    let mut class = classify_fine(&spec)?;
    // numeric moduli may drift slightly off the exact product
    class.coarse = coarse;
    Ok((class, Confidence::Heuristic))
}

/// Orders diagonal loxodromic eigenvalues as displayed: ascending moduli, or
/// the equal-modulus pair first.
fn diagonal_order<'a>(e: &[&'a EigenClass]) -> (&'a EigenClass, &'a EigenClass, &'a EigenClass) {
    if same_modulus(e[0].modulus, e[1].modulus) {
        (e[0], e[1], e[2])
    } else if same_modulus(e[1].modulus, e[2].modulus) {
        (e[1], e[2], e[0])
    } else {
        (e[0], e[1], e[2])
    }
}

/// The displayed Jordan representative, scaled by a positive real to `det_h = 1`.
pub fn canonical_form(class: &ElementClass) -> Result<HMat3> {
    let p = &class.params;
    let get = |x: &Option<EigenParam>, n: &str| -> Result<Quaternion> {
        Ok(x.as_ref().ok_or_else(|| Error::Validation(format!("missing `{n}`")))?.quaternion())
    };
    let m = match class.shape {
        Shape::Diagonal => HMat3::diag(get(&p.lambda, "lambda")?, get(&p.mu, "mu")?, get(&p.xi, "xi")?),
        Shape::Block2 => {
            let l = get(&p.lambda, "lambda")?;
            let mut m = HMat3::diag(l, l, get(&p.xi, "xi")?);
            m[(0, 1)] = Quaternion::ONE;
            m
        }
        Shape::Block3 => {
            let l = get(&p.lambda, "lambda")?;
            let mut m = HMat3::diag(l, l, l);
            m[(0, 1)] = Quaternion::ONE;
            m[(1, 2)] = Quaternion::ONE;
            m
        }
    };
    let d = m.det_h()?;
    if d <= 0.0 {
        return Err(Error::Validation("canonical form is singular".into()));
    }
    if (d - 1.0).abs() <= 1e-14 {
        Ok(m)
    } else {
        Ok(m.scale_real(d.powf(-1.0 / 6.0)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectiveOrder {
    Finite(u64),
    Infinite,
}

/// Least `n ≥ 1` with `gⁿ = ±I`, searched exactly over `1..=2·lcm(q)`.
pub fn projective_order(class: &ElementClass) -> ProjectiveOrder {
    if class.fine != Fine::RationalElliptic {
        return ProjectiveOrder::Infinite;
    }
    let angles: Vec<(i64, i64)> = [&class.params.lambda, &class.params.mu, &class.params.xi]
        .iter()
        .filter_map(|p| match p.as_ref().map(|e| &e.angle) {
            Some(AngleSpec::Rational { p, q }) => Some((*p, *q)),
            _ => None,
        })
        .collect();
    let l = angles.iter().fold(1i64, |acc, &(_, q)| lcm(acc, q));
    for n in 1..=2 * l {
        let all_one = angles.iter().all(|&(p, q)| (n * p).rem_euclid(q) == 0);
        // e^{2πi n p/q} = −1 ⇔ 2np/q is an odd integer
        let all_minus = angles.iter().all(|&(p, q)| {
            (2 * n * p).rem_euclid(q) == 0 && ((2 * n * p) / q).rem_euclid(2) == 1
        });
        if all_one || all_minus {
            return ProjectiveOrder::Finite(n as u64);
        }
    }
    unreachable!("n = lcm always gives the identity")
}

/// Fractional part of the golden ratio.
pub const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// One canonical spec per subclass, including both homothety kinds.
pub fn catalog() -> Vec<(&'static str, StructuredSpec)> {
    let r = |p, q| AngleSpec::rational(p, q).expect("valid");
    let irr = |v: f64, l: &str| AngleSpec::irrational(v, l).expect("valid");
    let sqrt2 = 2f64.sqrt() - 1.0;
    let sqrt3 = 3f64.sqrt() - 1.0;
    let u = EigenParam::unit;
    let m = EigenParam::new;
    let diag = |class: &str, l: EigenParam, mu: EigenParam, x: EigenParam| StructuredSpec {
        class: class.into(),
        params: Params { lambda: Some(l), mu: Some(mu), xi: Some(x) },
        shape: None,
    };
    let block = |class: &str, l: Option<EigenParam>, x: Option<EigenParam>| StructuredSpec {
        class: class.into(),
        params: Params { lambda: l, mu: None, xi: x },
        shape: None,
    };
    vec![
        ("rational_elliptic", diag("rational_elliptic", u(r(1, 3)), u(r(1, 5)), u(r(-8, 15)))),
        (
            "simple_irrational_elliptic",
            diag("simple_irrational_elliptic", u(irr(GOLDEN, "golden")), u(irr(GOLDEN, "golden")), u(irr(GOLDEN, "golden"))),
        ),
        ("compound_irrational_elliptic_I", diag("compound_irrational_elliptic", u(irr(GOLDEN, "golden")), u(r(1, 3)), u(r(1, 5)))),
        (
            "compound_irrational_elliptic_II",
            diag("compound_irrational_elliptic", u(irr(GOLDEN, "golden")), u(irr(sqrt2, "sqrt2")), u(r(1, 3))),
        ),
        (
            "compound_irrational_elliptic_III",
            diag("compound_irrational_elliptic", u(irr(GOLDEN, "golden")), u(irr(sqrt2, "sqrt2")), u(irr(sqrt3, "sqrt3"))),
        ),
        ("regular_loxodromic", diag("regular_loxodromic", m(0.5, r(0, 1)), m(1.0, r(0, 1)), m(2.0, r(0, 1)))),
        ("screw", diag("screw", m(2.0, r(1, 4)), m(2.0, r(0, 1)), m(0.25, r(0, 1)))),
        ("homothety_real", diag("homothety", m(2.0, r(0, 1)), m(2.0, r(0, 1)), m(0.25, r(0, 1)))),
        ("homothety_complex", diag("homothety", m(2.0, r(1, 4)), m(2.0, r(1, 4)), m(0.25, r(0, 1)))),
        ("loxo_parabolic", block("loxo_parabolic", Some(m(2.0, r(0, 1))), Some(m(0.25, r(0, 1))))),
        ("vertical_translation", block("vertical_translation", None, None)),
        ("non_vertical_translation", block("non_vertical_translation", None, None)),
        ("rational_ellipto_parabolic", block("rational_ellipto_parabolic", Some(u(r(1, 4))), Some(u(r(1, 3))))),
        (
            "irrational_ellipto_parabolic",
            block("irrational_ellipto_parabolic", Some(u(irr(GOLDEN, "golden"))), Some(u(irr(sqrt2, "sqrt2")))),
        ),
        ("ellipto_translation", block("ellipto_translation", Some(u(r(1, 4))), None)),
    ]
}

/// Catalog entries resolved to classes.
pub fn catalog_classes() -> Vec<(&'static str, ElementClass)> {
    catalog()
        .into_iter()
        .map(|(n, s)| (n, classify_fine(&s).expect("catalog entries are valid")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(json: &str) -> StructuredSpec {
        match ElementSpec::from_json(json).unwrap() {
            ElementSpec::Structured(s) => s,
            _ => panic!("expected structured"),
        }
    }

    #[test]
    fn coarse_examples() {
        assert_eq!(classify_coarse(&HMat3::diag_real(0.5, 1.0, 2.0), 1e-9).unwrap(), Coarse::Loxodromic);
        let vt = HMat3::from_real([[1.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        assert_eq!(classify_coarse(&vt, 1e-9).unwrap(), Coarse::Parabolic);
        let rot = |t: f64| Quaternion::from_polar_turns(1.0, t);
        let e = HMat3::diag(rot(1.0 / 3.0), rot(0.2), rot(-(1.0 / 3.0 + 0.2)));
        assert_eq!(classify_coarse(&e, 1e-9).unwrap(), Coarse::Elliptic);
    }

    #[test]
    fn fine_examples() {
        let c = classify_fine(&catalog()[0].1).unwrap();
        assert_eq!(c.fine, Fine::RationalElliptic);
        let c = classify_fine(&catalog()[1].1).unwrap();
        assert_eq!(c.fine, Fine::SimpleIrrationalElliptic);
        let lp = spec(
            r#"{"mode":"structured","class":"loxodromic","shape":"block2",
                "params":{"lambda":{"modulus":2.0},"xi":{"modulus":0.25}}}"#,
        );
        assert_eq!(classify_fine(&lp).unwrap().fine, Fine::LoxoParabolic);
    }

    #[test]
    fn schema_document_parses() {
        let s = spec(
            r#"{ "mode": "structured", "class": "screw", "params": {
                "lambda": {"modulus": 2.0, "angle": {"type":"rational","p":1,"q":4}},
                "mu": {"modulus": 2.0, "angle": {"type":"rational","p":0,"q":1}},
                "xi": {"modulus": 0.25, "angle": {"type":"rational","p":0,"q":1}} } }"#,
        );
        assert_eq!(classify_fine(&s).unwrap().fine, Fine::Screw);
    }

    #[test]
    fn schema_errors_carry_paths() {
        let err = ElementSpec::from_json(
            r#"{"mode":"structured","class":"screw","params":{"lambda":{"modulus":"two"}}}"#,
        )
        .unwrap_err();
        match err {
            Error::Schema { path, .. } => assert_eq!(path, "params.lambda.modulus"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(ElementSpec::from_json("{"), Err(Error::Schema { .. })));
        assert!(matches!(
            ElementSpec::from_json(r#"{"mode":"structured","class":"screw","bogus":1}"#),
            Err(Error::Schema { .. })
        ));
    }

    #[test]
    fn constraint_violations() {
        let screw_equal = spec(
            r#"{"mode":"structured","class":"screw","params":{
                "lambda":{"modulus":2.0},"mu":{"modulus":2.0},"xi":{"modulus":0.25}}}"#,
        );
        let e = classify_fine(&screw_equal).unwrap_err();
        assert!(matches!(&e, Error::Validation(m) if m.contains("λ ≠ μ")), "{e}");
        let bad_det = spec(
            r#"{"mode":"structured","class":"homothety","params":{
                "lambda":{"modulus":2.0},"xi":{"modulus":0.5}}}"#,
        );
        assert!(matches!(classify_fine(&bad_det), Err(Error::Validation(_))));
        let outside = spec(r#"{"mode":"structured","class":"parabolic","shape":"block2","params":{"xi":{"angle":{"type":"rational","p":1,"q":3}}}}"#);
        assert!(matches!(classify_fine(&outside), Err(Error::Validation(_))));
        let wrong_order = spec(
            r#"{"mode":"structured","class":"regular_loxodromic","params":{
                "lambda":{"modulus":2.0},"mu":{"modulus":1.0},"xi":{"modulus":0.5}}}"#,
        );
        assert!(matches!(classify_fine(&wrong_order), Err(Error::Validation(_))));
    }

    #[test]
    fn conjugate_pair_is_a_homothety() {
        // diag(2i, −2i, 1/4): λ and μ are distinct complex numbers in one class
        let s = spec(
            r#"{"mode":"structured","class":"loxodromic","params":{
                "lambda":{"modulus":2.0,"angle":{"type":"rational","p":1,"q":4}},
                "mu":{"modulus":2.0,"angle":{"type":"rational","p":3,"q":4}},
                "xi":{"modulus":0.25}}}"#,
        );
        assert_eq!(classify_fine(&s).unwrap().fine, Fine::Homothety(HomothetyKind::Complex));
    }

    #[test]
    fn compound_types() {
        let names: Vec<_> = catalog_classes().into_iter().map(|(_, c)| c.fine).collect();
        assert!(names.contains(&Fine::CompoundIrrationalElliptic(CompoundType::I)));
        assert!(names.contains(&Fine::CompoundIrrationalElliptic(CompoundType::II)));
        assert!(names.contains(&Fine::CompoundIrrationalElliptic(CompoundType::III)));
        let two_equal = spec(&format!(
            r#"{{"mode":"structured","class":"elliptic","params":{{
                "lambda":{{"angle":{{"type":"irrational","value":{GOLDEN},"label":"g"}}}},
                "mu":{{"angle":{{"type":"irrational","value":{GOLDEN},"label":"g"}}}},
                "xi":{{"angle":{{"type":"irrational","value":0.4142135623730951,"label":"s"}}}}}}}}"#
        ));
        let c = classify_fine(&two_equal).unwrap();
        assert_eq!(c.fine, Fine::CompoundIrrationalElliptic(CompoundType::III));
        assert!(c.case_label.is_some());
    }

    /// Continued-fraction oracle written independently: expand with exact
    /// integer arithmetic on a rational approximation.
    fn convergents(x: f64, n: usize) -> Vec<(i64, i64)> {
        let mut out = Vec::new();
        let (mut h0, mut h1, mut k0, mut k1) = (0i64, 1i64, 1i64, 0i64);
        let mut r = x;
        for _ in 0..n {
            let a = r.floor() as i64;
            let (h, k) = (a * h1 + h0, a * k1 + k0);
            out.push((h, k));
            (h0, h1, k0, k1) = (h1, h, k1, k);
            let f = r - a as f64;
            if f < 1e-15 {
                break;
            }
            r = 1.0 / f;
        }
        out
    }

    #[test]
    fn golden_ratio_is_not_rational() {
        assert_eq!(rational_approx(GOLDEN, 1e-9, 1_000_000), None);
        // every convergent up to the cap is a Fibonacci ratio, residual ~ 1/(√5 q²)
        for (p, q) in convergents(GOLDEN, 40).into_iter().filter(|c| c.1 > 1 && c.1 <= 1_000_000) {
            let resid = (GOLDEN - p as f64 / q as f64).abs() * (q as f64).powi(2);
            assert!(resid > 0.3 && resid < 0.6, "q = {q}");
        }
        assert_eq!(rational_approx(1.0 / 3.0, 1e-9, 1_000_000), Some((1, 3)));
        assert_eq!(rational_approx(37.0 / 97.0, 1e-9, 100), Some((37, 97)));
    }

    #[test]
    fn numeric_examples() {
        let rot = |t: f64| Quaternion::from_polar_turns(1.0, t);
        let e = HMat3::diag(rot(1.0 / 3.0), rot(0.2), rot(-(1.0 / 3.0 + 0.2)));
        let (c, conf) = classify_fine_numeric(&e, 1e-9, 1_000_000).unwrap();
        assert_eq!((c.fine, conf), (Fine::RationalElliptic, Confidence::Heuristic));
        let g = HMat3::diag(rot(GOLDEN), rot(GOLDEN), rot(GOLDEN));
        let (c, _) = classify_fine_numeric(&g, 1e-9, 1_000_000).unwrap();
        assert_eq!(c.fine, Fine::SimpleIrrationalElliptic);
        let (c, conf) = classify_fine_numeric(&HMat3::diag_real(0.5, 1.0, 2.0), 1e-9, 1_000_000).unwrap();
        assert_eq!((c.fine, conf), (Fine::RegularLoxodromic, Confidence::Heuristic));
        let (_, conf) = classify_spec(&ElementSpec::Structured(catalog()[6].1.clone())).unwrap();
        assert_eq!(conf, Confidence::Exact);
    }

    #[test]
    fn canonical_examples() {
        let classes = catalog_classes();
        let get = |n: &str| classes.iter().find(|(k, _)| *k == n).unwrap().1.clone();
        let g = canonical_form(&get("regular_loxodromic")).unwrap();
        assert!(g.max_abs_diff(&HMat3::diag_real(0.5, 1.0, 2.0)) < 1e-15);
        assert!((g.det_h().unwrap() - 1.0).abs() < 1e-14);
        let g = canonical_form(&get("vertical_translation")).unwrap();
        assert_eq!(g, HMat3::from_real([[1.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]));
        let g = canonical_form(&get("ellipto_translation")).unwrap();
        let i = Quaternion::from_polar_turns(1.0, 0.25);
        let mut expect = HMat3::diag(i, i, i);
        expect[(0, 1)] = Quaternion::ONE;
        expect[(1, 2)] = Quaternion::ONE;
        assert!(g.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn order_examples() {
        let classes = catalog_classes();
        let rational = &classes[0].1;
        // brute-force oracle on matrix powers
        let g = canonical_form(rational).unwrap();
        let brute = (1..=30u64)
            .find(|&n| {
                let p = g.pow(n);
                let s = p[(0, 0)];
                s.is_complex(1e-12)
                    && s.x.abs() < 1e-9
                    && p.max_abs_diff(&HMat3::identity().scale_real(s.w)) < 1e-9
            })
            .unwrap();
        assert_eq!(projective_order(rational), ProjectiveOrder::Finite(brute));
        assert_eq!(brute, 15);
        assert_eq!(projective_order(&classes[1].1), ProjectiveOrder::Infinite);
        assert_eq!(projective_order(&classes[10].1), ProjectiveOrder::Infinite);
        // all angles 1/2 mod 1 after n steps: diag(i, i, i) has order 2
        let s = StructuredSpec {
            class: "rational_elliptic".into(),
            params: Params {
                lambda: Some(EigenParam::unit(AngleSpec::rational(1, 4).unwrap())),
                mu: Some(EigenParam::unit(AngleSpec::rational(1, 4).unwrap())),
                xi: Some(EigenParam::unit(AngleSpec::rational(1, 4).unwrap())),
            },
            shape: None,
        };
        assert_eq!(projective_order(&classify_fine(&s).unwrap()), ProjectiveOrder::Finite(2));
    }

    #[test]
    fn catalog_round_trips() {
        for (name, c) in catalog_classes() {
            assert_eq!(c.fine.label(), name);
            let g = canonical_form(&c).unwrap();
            assert_eq!(classify_coarse(&g, 1e-9).unwrap(), c.coarse, "{name}");
        }
    }

    fn unit_spec() -> impl Strategy<Value = HMat3> {
        prop::array::uniform3(prop::array::uniform4(-1.0f64..1.0))
            .prop_map(|rows| {
                let mut m = HMat3::identity().scale_real(3.0);
                for (i, r) in rows.iter().enumerate() {
                    m[(i, (i + 1) % 3)] = Quaternion::from_array(*r);
                }
                m
            })
    }

    proptest! {
        #[test]
        fn coarse_is_conjugation_invariant(s in unit_spec(), idx in 0usize..15) {
            let (_, c) = &catalog_classes()[idx];
            let g = canonical_form(c).unwrap();
            let h = s * g * s.inverse().unwrap();
            // defective forms split their eigenvalues by about ε^{1/3} once conjugated
            prop_assert_eq!(classify_coarse(&h, 1e-4).unwrap(), c.coarse);
        }

        #[test]
        fn real_rescaling_preserves_class(r in 0.1f64..10.0, idx in 0usize..15) {
            let (_, c) = &catalog_classes()[idx];
            let g = canonical_form(c).unwrap();
            let h = g.scale_real(r).normalize_to_sl().unwrap();
            let a = classify_fine_numeric(&g, 1e-9, 1_000_000).unwrap().0;
            let b = classify_fine_numeric(&h, 1e-9, 1_000_000).unwrap().0;
            prop_assert_eq!(a.fine, b.fine);
        }

        #[test]
        fn matrix_mode_recovers_rational_denominators(p in 1i64..100, q in 2i64..=100, p2 in 0i64..100, q2 in 1i64..=100) {
            let s = StructuredSpec {
                class: "rational_ellipto_parabolic".into(),
                params: Params {
                    lambda: Some(EigenParam::unit(AngleSpec::rational(p, q).unwrap())),
                    mu: None,
                    xi: Some(EigenParam::unit(AngleSpec::rational(p2, q2).unwrap())),
                },
                shape: None,
            };
            prop_assume!(!AngleSpec::rational(p, q).unwrap().is_zero());
            let c = classify_fine(&s).unwrap();
            let (n, _) = classify_fine_numeric(&canonical_form(&c).unwrap(), 1e-9, 1_000_000).unwrap();
            prop_assert_eq!(n.fine, Fine::RationalElliptoParabolic);
        }
    }
}
