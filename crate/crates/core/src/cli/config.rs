//! INI-style scenario files.
//!
//! ```text
//! [robot]
//! model = one_dof          # or two_link
//! mass = 1.0
//!
//! [loss]
//! period = 10
//! rate = 0.02              # or alpha = 0.2
//! ```
//!
//! Every key maps onto one [`ScenarioConfig`] field; unknown sections and keys
//! are errors. Comments start with `#` or `;`.

use std::collections::BTreeMap;
use std::fmt;

use crate::energy::{ErrorMode, OperatorConvention};
use crate::loss::LossMode;
use crate::sim::{ConfigError, Environment, OperatorProfile, RobotSpec, ScenarioConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl ParseError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            key: None,
            message: message.into(),
        }
    }

    fn key(line: Option<usize>, key: &str, message: impl Into<String>) -> Self {
        Self {
            line,
            key: Some(key.to_string()),
            message: message.into(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        if let Some(key) = &self.key {
            write!(f, "`{key}`: ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ParseError {}

impl From<ConfigError> for ParseError {
    fn from(e: ConfigError) -> Self {
        Self {
            line: None,
            key: Some(e.key),
            message: e.message,
        }
    }
}

const KEYS: &[(&str, &[&str])] = &[
    (
        "robot",
        &["model", "mass", "master_mass", "slave_mass", "lengths", "masses", "gravity"],
    ),
    ("gains", &["b", "lambda", "k_m", "k_s", "k1", "k2"]),
    (
        "loss",
        &[
            "period",
            "alpha",
            "rate",
            "harmonics",
            "mode",
            "phase",
            "backward_alpha",
            "backward_phase",
            "delay_steps",
        ],
    ),
    (
        "operator",
        &["profile", "amplitude", "start", "width", "frequency", "hold", "seed"],
    ),
    ("environment", &["stiffness", "damping", "mass"]),
    (
        "sim",
        &[
            "dt",
            "duration",
            "q_m0",
            "q_s0",
            "qd_m0",
            "qd_s0",
            "error_mode",
            "convention",
            "seed",
            "settle_tolerance",
            "settle_hold",
        ],
    ),
];

/// Raw `section.key -> (value, line)` entries.
struct Entries(BTreeMap<String, (String, usize)>);

impl Entries {
    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.0.remove(key)
    }

    fn f64(&mut self, key: &str) -> Result<Option<f64>, ParseError> {
        self.take(key).map(|(v, line)| parse_f64(key, &v, line)).transpose()
    }

    fn list(&mut self, key: &str) -> Result<Option<Vec<f64>>, ParseError> {
        self.take(key)
            .map(|(v, line)| {
                v.split(',')
                    .map(|x| parse_f64(key, x, line))
                    .collect::<Result<Vec<_>, _>>()
            })
            .transpose()
    }

    fn uint(&mut self, key: &str) -> Result<Option<u64>, ParseError> {
        self.take(key)
            .map(|(v, line)| {
                v.trim().parse::<u64>().map_err(|_| {
                    ParseError::key(Some(line), key, format!("expected a non-negative integer, got `{v}`"))
                })
            })
            .transpose()
    }

    fn bool(&mut self, key: &str) -> Result<Option<bool>, ParseError> {
        self.take(key)
            .map(|(v, line)| match v.trim().to_ascii_lowercase().as_str() {
                "true" | "yes" | "on" | "1" => Ok(true),
                "false" | "no" | "off" | "0" => Ok(false),
                _ => Err(ParseError::key(Some(line), key, format!("expected true or false, got `{v}`"))),
            })
            .transpose()
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.0.get(key).map(|(_, l)| *l)
    }
}

fn parse_f64(key: &str, v: &str, line: usize) -> Result<f64, ParseError> {
    let x: f64 = v
        .trim()
        .parse()
        .map_err(|_| ParseError::key(Some(line), key, format!("expected a number, got `{}`", v.trim())))?;
    if !x.is_finite() {
        return Err(ParseError::key(Some(line), key, "must be finite"));
    }
    Ok(x)
}

fn tokenize(text: &str) -> Result<Entries, ParseError> {
    let mut map = BTreeMap::new();
    let mut section: Option<&str> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split(['#', ';']).next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ParseError::at(line, format!("malformed section header `{content}`")))?
                .trim();
            section = Some(
                KEYS.iter()
                    .find(|(s, _)| *s == name)
                    .map(|(s, _)| *s)
                    .ok_or_else(|| ParseError::at(line, format!("unknown section [{name}]")))?,
            );
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| ParseError::at(line, format!("expected `key = value`, got `{content}`")))?;
        let (key, value) = (key.trim(), value.trim());
        let sec = section.ok_or_else(|| ParseError::at(line, format!("key `{key}` outside any section")))?;
        let full = format!("{sec}.{key}");
        let known = KEYS.iter().any(|(s, keys)| *s == sec && keys.contains(&key));
        if !known {
            return Err(ParseError::key(Some(line), &full, "unknown key"));
        }
        if value.is_empty() {
            return Err(ParseError::key(Some(line), &full, "missing value"));
        }
        if let Some((_, first)) = map.insert(full.clone(), (value.to_string(), line)) {
            return Err(ParseError::key(
                Some(line),
                &full,
                format!("duplicate key (first set on line {first})"),
            ));
        }
    }
    Ok(Entries(map))
}

/// Parse a config document and validate the resulting scenario.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ParseError> {
    let mut e = tokenize(text)?;
    let mut cfg = ScenarioConfig::default();

    // [robot]
    let model_line = e.line("robot.model");
    let model = e.take("robot.model").map(|(v, _)| v.to_ascii_lowercase());
    match model.as_deref().unwrap_or("one_dof") {
        "one_dof" => {
            for k in ["robot.lengths", "robot.masses", "robot.gravity"] {
                if let Some((_, line)) = e.take(k) {
                    return Err(ParseError::key(Some(line), k, "only applies to model = two_link"));
                }
            }
            let line = e.line("robot.mass");
            let both = e.f64("robot.mass")?;
            let mut masses = [both.unwrap_or(1.0); 2];
            let mut lines = [line; 2];
            for (i, k) in ["robot.master_mass", "robot.slave_mass"].into_iter().enumerate() {
                lines[i] = e.line(k).or(lines[i]);
                if let Some(m) = e.f64(k)? {
                    masses[i] = m;
                }
            }
            for (i, m) in masses.iter().enumerate() {
                if *m <= 0.0 {
                    return Err(ParseError::key(lines[i], "robot.mass", format!("must be positive, got {m}")));
                }
            }
            cfg.robot = RobotSpec::OneDof {
                master_mass: masses[0],
                slave_mass: masses[1],
            };
        }
        "two_link" => {
            for k in ["robot.mass", "robot.master_mass", "robot.slave_mass"] {
                if let Some((_, line)) = e.take(k) {
                    return Err(ParseError::key(Some(line), k, "use `masses` for model = two_link"));
                }
            }
            let pair = |e: &mut Entries, key: &str, default: [f64; 2]| -> Result<[f64; 2], ParseError> {
                let line = e.line(key);
                match e.list(key)? {
                    None => Ok(default),
                    Some(v) if v.len() == 2 => Ok([v[0], v[1]]),
                    Some(v) => Err(ParseError::key(line, key, format!("expected 2 values, got {}", v.len()))),
                }
            };
            let lengths = pair(&mut e, "robot.lengths", [1.0, 1.0])?;
            let masses = pair(&mut e, "robot.masses", [1.0, 1.0])?;
            let gravity = e.bool("robot.gravity")?.unwrap_or(false);
            cfg.robot = RobotSpec::TwoLink {
                lengths,
                masses,
                gravity,
            };
        }
        other => {
            return Err(ParseError::key(
                model_line,
                "robot.model",
                format!("expected one_dof or two_link, got `{other}`"),
            ))
        }
    }

    // [gains]
    if let Some(b) = e.list("gains.b")? {
        cfg.gains.b = b;
    }
    if let Some(l) = e.list("gains.lambda")? {
        cfg.gains.lambda = l;
    }
    cfg.gains.k_m = e.list("gains.k_m")?;
    cfg.gains.k_s = e.list("gains.k_s")?;
    cfg.gains.k1 = e.list("gains.k1")?;
    cfg.gains.k2 = e.list("gains.k2")?;

    // [loss]
    if let Some(p) = e.f64("loss.period")? {
        cfg.loss.period = p;
    }
    let alpha_line = e.line("loss.alpha");
    let alpha = e.f64("loss.alpha")?;
    let rate = e.f64("loss.rate")?;
    cfg.loss.alpha = match (alpha, rate) {
        (Some(_), Some(_)) => {
            return Err(ParseError::key(alpha_line, "loss.alpha", "set either `alpha` or `rate`, not both"))
        }
        (Some(a), None) => a,
        (None, Some(r)) => r * cfg.loss.period,
        (None, None) => cfg.loss.alpha,
    };
    if let Some(n) = e.uint("loss.harmonics")? {
        cfg.loss.harmonics = u32::try_from(n)
            .map_err(|_| ParseError::key(None, "loss.harmonics", "too large"))?;
    }
    if let Some((v, line)) = e.take("loss.mode") {
        cfg.loss.mode = LossMode::parse(&v).ok_or_else(|| {
            ParseError::key(
                Some(line),
                "loss.mode",
                format!("expected ideal, fourier_paper, fourier_corrected or fourier_clamped, got `{v}`"),
            )
        })?;
    }
    if let Some(p) = e.f64("loss.phase")? {
        cfg.loss.phase = p;
    }
    cfg.loss.backward_alpha = e.f64("loss.backward_alpha")?;
    cfg.loss.backward_phase = e.f64("loss.backward_phase")?;
    if let Some(d) = e.uint("loss.delay_steps")? {
        cfg.loss.delay_steps = d.min(u32::MAX as u64) as u32;
    }

    // [operator]
    cfg.operator = parse_operator(&mut e)?;

    // [environment]
    let mut env = Environment::default();
    if let Some(k) = e.f64("environment.stiffness")? {
        env.stiffness = k;
    }
    if let Some(b) = e.f64("environment.damping")? {
        env.damping = b;
    }
    if let Some(m) = e.f64("environment.mass")? {
        env.mass = m;
    }
    cfg.environment = env;

    // [sim]
    if let Some(dt) = e.f64("sim.dt")? {
        cfg.dt = dt;
    }
    if let Some(d) = e.f64("sim.duration")? {
        cfg.duration = d;
    }
    for (key, field) in [
        ("sim.q_m0", &mut cfg.q_m0),
        ("sim.q_s0", &mut cfg.q_s0),
        ("sim.qd_m0", &mut cfg.qd_m0),
        ("sim.qd_s0", &mut cfg.qd_s0),
    ] {
        if let Some(v) = e.list(key)? {
            *field = v;
        }
    }
    if let Some((v, line)) = e.take("sim.error_mode") {
        cfg.error_mode = ErrorMode::parse(&v).ok_or_else(|| {
            ParseError::key(Some(line), "sim.error_mode", format!("expected analysis or simulation, got `{v}`"))
        })?;
    }
    if let Some((v, line)) = e.take("sim.convention") {
        cfg.convention = OperatorConvention::parse(&v).ok_or_else(|| {
            ParseError::key(Some(line), "sim.convention", format!("expected exogenous or passive, got `{v}`"))
        })?;
    }
    if let Some(s) = e.uint("sim.seed")? {
        cfg.seed = s;
    }
    cfg.settle_tolerance = e.f64("sim.settle_tolerance")?;
    if let Some(h) = e.f64("sim.settle_hold")? {
        cfg.settle_hold = h;
    }

    debug_assert!(e.0.is_empty(), "unconsumed keys: {:?}", e.0.keys());
    cfg.validate().map_err(|err| {
        let line = e.line(&err.key).or_else(|| line_of(text, &err.key));
        ParseError {
            line,
            ..ParseError::from(err)
        }
    })?;
    Ok(cfg)
}

/// Line on which `section.key` is set, for validation errors raised after parsing.
fn line_of(text: &str, full_key: &str) -> Option<usize> {
    let (sec, key) = full_key.split_once('.')?;
    let mut current = "";
    for (i, raw) in text.lines().enumerate() {
        let content = raw.split(['#', ';']).next().unwrap_or("").trim();
        if let Some(rest) = content.strip_prefix('[') {
            current = rest.trim_end_matches(']').trim();
        } else if let Some((k, _)) = content.split_once('=') {
            let k = k.trim();
            let aliases: &[&str] = match full_key {
                "robot.mass" => &["mass", "master_mass", "slave_mass"],
                "loss.alpha" => &["alpha", "rate"],
                _ => &[],
            };
            if current == sec && (k == key || aliases.contains(&k)) {
                return Some(i + 1);
            }
        }
    }
    None
}

fn parse_operator(e: &mut Entries) -> Result<OperatorProfile, ParseError> {
    let profile_line = e.line("operator.profile");
    let profile = e
        .take("operator.profile")
        .map(|(v, _)| v.to_ascii_lowercase())
        .unwrap_or_else(|| "pulse".to_string());
    let allowed: &[&str] = match profile.as_str() {
        "zero" => &[],
        "pulse" => &["amplitude", "start", "width"],
        "sine" => &["amplitude", "frequency"],
        "random" => &["amplitude", "hold", "seed"],
        other => {
            return Err(ParseError::key(
                profile_line,
                "operator.profile",
                format!("expected zero, pulse, sine or random, got `{other}`"),
            ))
        }
    };
    for k in ["amplitude", "start", "width", "frequency", "hold", "seed"] {
        let full = format!("operator.{k}");
        if !allowed.contains(&k) {
            if let Some((_, line)) = e.take(&full) {
                return Err(ParseError::key(
                    Some(line),
                    &full,
                    format!("not used by profile `{profile}`"),
                ));
            }
        }
    }
    let amplitude = e.f64("operator.amplitude")?.unwrap_or(1.0);
    Ok(match profile.as_str() {
        "zero" => OperatorProfile::Zero,
        "pulse" => OperatorProfile::Pulse {
            amplitude,
            start: e.f64("operator.start")?.unwrap_or(1.0),
            width: e.f64("operator.width")?.unwrap_or(2.0),
        },
        "sine" => OperatorProfile::Sine {
            amplitude,
            frequency: e.f64("operator.frequency")?.unwrap_or(0.5),
        },
        _ => OperatorProfile::Random {
            amplitude,
            hold: e.f64("operator.hold")?.unwrap_or(0.1),
            seed: e.uint("operator.seed")?.unwrap_or(0),
        },
    })
}

/// Render a config back to the file format. `parse_config(render_config(c)) == c`.
pub fn render_config(cfg: &ScenarioConfig) -> String {
    let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
    let mut out = String::new();
    out.push_str("[robot]\n");
    match &cfg.robot {
        RobotSpec::OneDof {
            master_mass,
            slave_mass,
        } => {
            out.push_str("model = one_dof\n");
            out.push_str(&format!("master_mass = {master_mass:?}\nslave_mass = {slave_mass:?}\n"));
        }
        RobotSpec::TwoLink {
            lengths,
            masses,
            gravity,
        } => {
            out.push_str("model = two_link\n");
            out.push_str(&format!(
                "lengths = {}\nmasses = {}\ngravity = {gravity}\n",
                list(lengths),
                list(masses)
            ));
        }
    }
    let g = &cfg.gains;
    out.push_str(&format!("\n[gains]\nb = {}\nlambda = {}\n", list(&g.b), list(&g.lambda)));
    for (k, v) in [("k_m", &g.k_m), ("k_s", &g.k_s), ("k1", &g.k1), ("k2", &g.k2)] {
        if let Some(v) = v {
            out.push_str(&format!("{k} = {}\n", list(v)));
        }
    }
    let l = &cfg.loss;
    out.push_str(&format!(
        "\n[loss]\nperiod = {:?}\nalpha = {:?}\nharmonics = {}\nmode = {}\nphase = {:?}\ndelay_steps = {}\n",
        l.period,
        l.alpha,
        l.harmonics,
        l.mode.name(),
        l.phase,
        l.delay_steps
    ));
    if let Some(a) = l.backward_alpha {
        out.push_str(&format!("backward_alpha = {a:?}\n"));
    }
    if let Some(p) = l.backward_phase {
        out.push_str(&format!("backward_phase = {p:?}\n"));
    }
    out.push_str("\n[operator]\n");
    match cfg.operator {
        OperatorProfile::Zero => out.push_str("profile = zero\n"),
        OperatorProfile::Pulse {
            amplitude,
            start,
            width,
        } => out.push_str(&format!(
            "profile = pulse\namplitude = {amplitude:?}\nstart = {start:?}\nwidth = {width:?}\n"
        )),
        OperatorProfile::Sine {
            amplitude,
            frequency,
        } => out.push_str(&format!(
            "profile = sine\namplitude = {amplitude:?}\nfrequency = {frequency:?}\n"
        )),
        OperatorProfile::Random {
            amplitude,
            hold,
            seed,
        } => out.push_str(&format!(
            "profile = random\namplitude = {amplitude:?}\nhold = {hold:?}\nseed = {seed}\n"
        )),
    }
    let env = &cfg.environment;
    out.push_str(&format!(
        "\n[environment]\nstiffness = {:?}\ndamping = {:?}\nmass = {:?}\n",
        env.stiffness, env.damping, env.mass
    ));
    out.push_str(&format!(
        "\n[sim]\ndt = {:?}\nduration = {:?}\nq_m0 = {}\nq_s0 = {}\nqd_m0 = {}\nqd_s0 = {}\nerror_mode = {}\nconvention = {}\nseed = {}\nsettle_hold = {:?}\n",
        cfg.dt,
        cfg.duration,
        list(&cfg.q_m0),
        list(&cfg.q_s0),
        list(&cfg.qd_m0),
        list(&cfg.qd_s0),
        cfg.error_mode.name(),
        cfg.convention.name(),
        cfg.seed,
        cfg.settle_hold
    ));
    if let Some(t) = cfg.settle_tolerance {
        out.push_str(&format!("settle_tolerance = {t:?}\n"));
    }
    out
}
