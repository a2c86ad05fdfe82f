mod plot;

use std::fmt::Display;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use sg_core::admissibility::{
    admissibility_check, divisor_from_polynomial, enumerate_components, find_witness,
    AdmissibilityError, PairSelector, RealPolynomial, TopologicalType,
};
use sg_core::averaging::{orbit_average, AveragingError, SymmetricFunctional};
use sg_core::dynamics::{
    evolve_to, potential, potential_grid, sg_operator_residual, winding_density_with, Direction,
    DivisorState, DynamicsError, EvolveOptions,
};
use sg_core::periods::{PeriodError, Periods};
use sg_core::spectral_curve::{CurveError, SpectralCurve};

#[derive(Parser, Debug)]
#[command(
    name = "sg",
    version,
    about = "Real finite-gap sine-Gordon spectral data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a curve file, and optionally a polynomial against it.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Coefficients c_0,...,c_{g-1} of P.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        poly: Option<Vec<f64>>,
    },
    /// One admissible witness per real component.
    Components {
        #[command(flatten)]
        common: Common,
    },
    /// Topological charge density of one or all components.
    Charge {
        #[command(flatten)]
        common: Common,
        /// Also integrate the x-flow and report the winding of u.
        #[arg(long)]
        verify: bool,
    },
    /// Divisor trajectory along a flow, or u on an (x, t) grid with --grid.
    Evolve {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        poly: Vec<f64>,
        /// One of xi, eta, x, t.
        #[arg(long, default_value = "x")]
        dir: Direction,
        #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
        length: f64,
        /// Number of output rows after the initial one.
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// Grid spacing used with --grid.
        #[arg(long, default_value_t = 0.01)]
        h: f64,
    },
    /// Orbit averages of registry functionals.
    Average {
        #[command(flatten)]
        common: Common,
        /// Functional name; all registry entries when omitted.
        #[arg(long)]
        functional: Option<String>,
    },
    /// SVG picture of the forbidden domains with the graph of P.
    Plot {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        poly: Option<Vec<f64>>,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Curve file `{"E": [[re, im], ...]}`.
    curve: PathBuf,
    /// Sign word of a real component, e.g. `+-`.
    #[arg(long = "type")]
    sign_word: Option<String>,
    /// Horizon of flow integrations.
    #[arg(long = "T")]
    horizon: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    /// Grid size `<n>x<m>`.
    #[arg(long)]
    grid: Option<Size>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// SVG size `<W>x<H>`.
    #[arg(long, default_value = "800x500")]
    svg: Size,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Size(usize, usize);

impl FromStr for Size {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once('x')
            .ok_or_else(|| format!("expected <n>x<m>, got {s:?}"))?;
        let parse = |v: &str| {
            v.parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| format!("expected a positive integer, got {v:?}"))
        };
        Ok(Size(parse(a)?, parse(b)?))
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Validation(String),
    Numeric(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Validation(_) => 2,
            Failure::Numeric(_) | Failure::Io(_) => 3,
        }
    }
}

impl Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Validation(m) | Failure::Numeric(m) | Failure::Io(m) => {
                f.write_str(m)
            }
        }
    }
}

/// `module::Variant: message`, with the variant taken from the `Debug` form.
fn tagged<E: std::fmt::Debug + Display>(module: &str, e: &E) -> String {
    let dbg = format!("{e:?}");
    let variant: String = dbg
        .chars()
        .take_while(|c| c.is_alphanumeric() || *c == '_')
        .collect();
    format!("{module}::{variant}: {e}")
}

impl From<CurveError> for Failure {
    fn from(e: CurveError) -> Self {
        match e {
            CurveError::LostBranch { .. } | CurveError::PathThroughBranchPoint { .. } => {
                Failure::Numeric(tagged("spectral_curve", &e))
            }
            _ => Failure::Validation(tagged("spectral_curve", &e)),
        }
    }
}

impl From<AdmissibilityError> for Failure {
    fn from(e: AdmissibilityError) -> Self {
        match e {
            AdmissibilityError::WitnessSearchFailed(_)
            | AdmissibilityError::PairingAmbiguity
            | AdmissibilityError::CoincidentProjections(..) => {
                Failure::Numeric(tagged("admissibility", &e))
            }
            _ => Failure::Validation(tagged("admissibility", &e)),
        }
    }
}

impl From<PeriodError> for Failure {
    fn from(e: PeriodError) -> Self {
        match e {
            PeriodError::TypeMismatch { .. } => Failure::Validation(tagged("periods", &e)),
            PeriodError::Curve(c) => c.into(),
            _ => Failure::Numeric(tagged("periods", &e)),
        }
    }
}

impl From<DynamicsError> for Failure {
    fn from(e: DynamicsError) -> Self {
        Failure::Numeric(tagged("dynamics", &e))
    }
}

impl From<AveragingError> for Failure {
    fn from(e: AveragingError) -> Self {
        match e {
            AveragingError::Dynamics(d) => d.into(),
            AveragingError::Periods(p) => p.into(),
            AveragingError::UnknownFunctional(_) | AveragingError::OrderTooLarge(_) => {
                Failure::Usage(format!("--functional: {}", tagged("averaging", &e)))
            }
            _ => Failure::Numeric(tagged("averaging", &e)),
        }
    }
}

/// C-style `%.12e`.
fn sci(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let s = format!("{v:.12e}");
    let (mantissa, exp) = s.split_once('e').unwrap_or((&s, "0"));
    let exp: i32 = exp.parse().unwrap_or(0);
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

struct Csv {
    rows: Vec<String>,
}

impl Csv {
    fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self {
            rows: vec![header
                .iter()
                .map(AsRef::as_ref)
                .collect::<Vec<_>>()
                .join(",")],
        }
    }

    fn row<S: AsRef<str>>(&mut self, cells: &[S]) {
        self.rows.push(
            cells
                .iter()
                .map(AsRef::as_ref)
                .collect::<Vec<_>>()
                .join(","),
        );
    }

    fn finish(self) -> String {
        let mut s = self.rows.join("\n");
        s.push('\n');
        s
    }
}

fn load_curve(common: &Common) -> Result<SpectralCurve, Failure> {
    let text = std::fs::read_to_string(&common.curve)
        .map_err(|e| Failure::Validation(format!("{}: {e}", common.curve.display())))?;
    Ok(SpectralCurve::from_json(&text)?)
}

fn sign_word(common: &Common, curve: &SpectralCurve) -> Result<Option<TopologicalType>, Failure> {
    common
        .sign_word
        .as_deref()
        .map(|w| TopologicalType::parse_for(w, curve.m()))
        .transpose()
        .map_err(|e| Failure::Usage(format!("--type: {}", tagged("admissibility", &e))))
}

fn types(common: &Common, curve: &SpectralCurve) -> Result<Vec<TopologicalType>, Failure> {
    Ok(match sign_word(common, curve)? {
        Some(t) => vec![t],
        None => TopologicalType::all(curve.m()),
    })
}

fn polynomial(curve: &SpectralCurve, coeffs: &[f64]) -> Result<RealPolynomial, Failure> {
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Failure::Usage("--poly: coefficients must be finite".into()));
    }
    let p = RealPolynomial::new(coeffs.to_vec());
    if coeffs.len() != curve.genus() {
        return Err(AdmissibilityError::WrongDegree {
            got: coeffs.len(),
            genus: curve.genus(),
        }
        .into());
    }
    Ok(p)
}

fn positive(name: &str, v: Option<f64>, default: f64) -> Result<f64, Failure> {
    let v = v.unwrap_or(default);
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Failure::Usage(format!(
            "{name}: expected a positive number, got {v}"
        )))
    }
}

fn evolve_options(common: &Common) -> Result<EvolveOptions, Failure> {
    Ok(EvolveOptions {
        tol: positive("--tol", common.tol, EvolveOptions::default().tol)?,
        ..EvolveOptions::default()
    })
}

fn run_command(cmd: &Command) -> Result<(String, Option<PathBuf>), Failure> {
    let (common, text) = match cmd {
        Command::Validate { common, poly } => (common, validate(common, poly.as_deref())?),
        Command::Components { common } => (common, components(common)?),
        Command::Charge { common, verify } => (common, charge(common, *verify)?),
        Command::Evolve {
            common,
            poly,
            dir,
            length,
            samples,
            h,
        } => (common, evolve(common, poly, *dir, *length, *samples, *h)?),
        Command::Average { common, functional } => {
            (common, average(common, functional.as_deref())?)
        }
        Command::Plot { common, poly } => {
            let curve = load_curve(common)?;
            let p = poly.as_deref().map(|c| polynomial(&curve, c)).transpose()?;
            let Size(w, h) = common.svg;
            (
                common,
                plot::render_svg(&curve, p.as_ref(), w as u32, h as u32),
            )
        }
    };
    Ok((text, common.out.clone()))
}

fn validate(common: &Common, poly: Option<&[f64]>) -> Result<String, Failure> {
    let curve = load_curve(common)?;
    sign_word(common, &curve)?;
    let Some(coeffs) = poly else {
        let mut csv = Csv::new(&["genus", "m", "scale", "sqrt_prod"]);
        csv.row(&[
            curve.genus().to_string(),
            curve.m().to_string(),
            sci(curve.scale()),
            sci(curve.sqrt_prod()),
        ]);
        return Ok(csv.finish());
    };
    let p = polynomial(&curve, coeffs)?;
    let v = admissibility_check(&curve, &p)?;
    if !v.admissible {
        let detail: Vec<String> = v.violations.iter().map(|x| format!("{x:?}")).collect();
        return Err(Failure::Validation(format!(
            "admissibility::NotAdmissible: {}",
            detail.join("; ")
        )));
    }
    let t = v
        .topological_type
        .clone()
        .unwrap_or_else(|| TopologicalType::new(Vec::new()));
    if let Some(want) = sign_word(common, &curve)? {
        if want != t {
            return Err(Failure::Validation(format!(
                "admissibility::TypeMismatch: polynomial has type {t:?}, expected {want:?}",
                t = t.to_string(),
                want = want.to_string()
            )));
        }
    }
    let mut csv = Csv::new(&["admissible", "boundary", "type"]);
    csv.row(&["true".to_string(), v.boundary.to_string(), t.to_string()]);
    Ok(csv.finish())
}

fn components(common: &Common) -> Result<String, Failure> {
    let curve = load_curve(common)?;
    let comps = enumerate_components(&curve)?;
    let mut header = vec!["type".to_string()];
    header.extend((0..curve.genus()).map(|j| format!("c{j}")));
    header.push("boundary".into());
    let mut csv = Csv::new(&header);
    for (t, p) in comps {
        let v = admissibility_check(&curve, &p)?;
        let mut row = vec![t.to_string()];
        row.extend(p.coeffs().iter().map(|&c| sci(c)));
        row.push(v.boundary.to_string());
        csv.row(&row);
    }
    Ok(csv.finish())
}

fn charge(common: &Common, verify: bool) -> Result<String, Failure> {
    let curve = load_curve(common)?;
    let types = types(common, &curve)?;
    let horizon = positive("--T", common.horizon, 2000.0)?;
    let opts = evolve_options(common)?;
    let periods = Periods::compute(&curve)?;
    let mut header = vec!["type".to_string()];
    header.extend((1..=curve.m()).map(|k| format!("U{k}")));
    header.extend(["n_bar".into(), "max_a_residual".into()]);
    if verify {
        header.extend(
            [
                "winding",
                "winding_band",
                "winding_plain",
                "plain_band",
                "difference",
            ]
            .map(String::from),
        );
    }
    let mut csv = Csv::new(&header);
    for t in types {
        let c = periods.charge(&t)?;
        let mut row = vec![t.to_string()];
        row.extend(c.u.iter().map(|u| sci(u.re)));
        row.extend([sci(c.n_bar), sci(c.max_a_residual)]);
        if verify {
            let p = find_witness(&curve, &t)?;
            let d = divisor_from_polynomial(&curve, &p, &PairSelector::default())?;
            let w = winding_density_with(&curve, &d, horizon, opts)?;
            row.extend([
                sci(w.smoothed),
                sci(w.smoothed_band),
                sci(w.density),
                sci(w.error_band),
                sci(c.n_bar - w.smoothed),
            ]);
        }
        csv.row(&row);
    }
    Ok(csv.finish())
}

fn evolve(
    common: &Common,
    poly: &[f64],
    dir: Direction,
    length: f64,
    samples: usize,
    h: f64,
) -> Result<String, Failure> {
    let curve = load_curve(common)?;
    let p = polynomial(&curve, poly)?;
    let d = divisor_from_polynomial(&curve, &p, &PairSelector::default())?;
    if let Some(want) = sign_word(common, &curve)? {
        let got = admissibility_check(&curve, &p)?.topological_type;
        if got.as_ref() != Some(&want) {
            return Err(Failure::Validation(format!(
                "admissibility::TypeMismatch: polynomial is not of type {want}"
            )));
        }
    }
    let opts = evolve_options(common)?;

    if let Some(Size(nx, nt)) = common.grid {
        let h = positive("--h", Some(h), h)?;
        let u = potential_grid(&curve, &d, nx, nt, h, h, opts)?;
        eprintln!("residual {}", sci(sg_operator_residual(&u, h, h)));
        let mut csv = Csv::new(&["x", "t", "re_eiu", "im_eiu", "u"]);
        for (i, col) in u.iter().enumerate() {
            for (j, &v) in col.iter().enumerate() {
                csv.row(&[
                    sci(i as f64 * h),
                    sci(j as f64 * h),
                    sci(v.cos()),
                    sci(v.sin()),
                    sci(v),
                ]);
            }
        }
        return Ok(csv.finish());
    }

    if !length.is_finite() || samples == 0 {
        return Err(Failure::Usage(
            "--length/--samples: need a finite length and samples > 0".into(),
        ));
    }
    let targets: Vec<f64> = (1..=samples)
        .map(|i| length * i as f64 / samples as f64)
        .collect();
    let start = DivisorState::new(&d, 0.0, 0.0);
    let states = evolve_to(&curve, &start, dir, &targets, opts)?;
    let mut header = vec![dir.to_string()];
    for k in 1..=curve.genus() {
        header.push(format!("re_lambda{k}"));
        header.push(format!("im_lambda{k}"));
    }
    header.extend(["re_eiu", "im_eiu", "u"].map(String::from));
    let mut csv = Csv::new(&header);
    let u0 = potential(&curve, &d).arg();
    let rows = std::iter::once((0.0, start, u0)).chain(
        targets
            .iter()
            .zip(states)
            .map(|(&s, (state, u))| (s, state, u)),
    );
    for (s, state, u) in rows {
        let mut row = vec![sci(s)];
        for l in state.lambdas() {
            row.push(sci(l.re));
            row.push(sci(l.im));
        }
        let e: Complex64 = potential(&curve, &state.divisor());
        row.extend([sci(e.re), sci(e.im), sci(u)]);
        csv.row(&row);
    }
    Ok(csv.finish())
}

fn average(common: &Common, functional: Option<&str>) -> Result<String, Failure> {
    let curve = load_curve(common)?;
    let types = types(common, &curve)?;
    let horizon = positive("--T", common.horizon, 200.0)?;
    let fs = match functional {
        Some(name) => vec![SymmetricFunctional::from_name(name)?],
        None => SymmetricFunctional::registry(),
    };
    let mut csv = Csv::new(&["functional", "component", "value", "value_im", "error_band"]);
    for f in &fs {
        for t in &types {
            let p = find_witness(&curve, t)?;
            let d = divisor_from_polynomial(&curve, &p, &PairSelector::default())?;
            let a = orbit_average(&curve, &d, f, horizon)?;
            csv.row(&[
                f.to_string(),
                t.to_string(),
                sci(a.value.re),
                sci(a.value.im),
                sci(a.error_band),
            ]);
        }
    }
    Ok(csv.finish())
}

fn init_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("SG_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().map_err(|_| {
        Failure::Usage(format!(
            "SG_THREADS: expected a non-negative integer, got {v:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Usage(format!("SG_THREADS: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = init_threads().and_then(|()| run_command(&cli.command));
    match result {
        Ok((text, out)) => {
            let written = match out {
                Some(path) => std::fs::write(&path, text)
                    .map_err(|e| Failure::Io(format!("--out {}: {e}", path.display()))),
                None => std::io::stdout()
                    .write_all(text.as_bytes())
                    .map_err(|e| Failure::Io(format!("stdout: {e}"))),
            };
            match written {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.code())
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
