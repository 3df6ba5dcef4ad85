//! Pulse-program text format: parser, printer, and the built-in conditional
//! sign-flip sequence.
//!
//! Grammar (one statement per line, whitespace-separated tokens):
//!
//! ```text
//! program := line+
//! line    := pulse | delay | comment
//! pulse   := "pulse" axis angle_deg target
//! delay   := "delay" seconds_expr
//! axis    := "x" | "y" | "-x" | "-y"
//! target  := "q1" | "q2" | "all"
//! seconds_expr := number | "1/(2J)"
//! ```
//!
//! Comments start with `#`. Angles are written in degrees (spectroscopy
//! convention) and stored in radians. Pulse durations are not part of the
//! text: they are `flip_angle / ω₁`, resolved when a sequence is compiled
//! against a parameter set, as is the `1/(2J)` delay expression.

use crate::model::BasisLabel;
use thiserror::Error;

/// Pulse axis in the rotating frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseAxis {
    X,
    Y,
    MinusX,
    MinusY,
}

impl PulseAxis {
    /// Sign applied to the drive amplitude: −1 for the `-x`/`-y` axes.
    pub fn sign(self) -> f64 {
        match self {
            Self::X | Self::Y => 1.0,
            Self::MinusX | Self::MinusY => -1.0,
        }
    }

    /// The underlying transverse axis.
    pub fn drive_axis(self) -> crate::model::DriveAxis {
        match self {
            Self::X | Self::MinusX => crate::model::DriveAxis::X,
            Self::Y | Self::MinusY => crate::model::DriveAxis::Y,
        }
    }
}

impl std::fmt::Display for PulseAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::X => "x",
            Self::Y => "y",
            Self::MinusX => "-x",
            Self::MinusY => "-y",
        })
    }
}

/// Which qubits a pulse drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Targets {
    Q1,
    Q2,
    All,
}

impl Targets {
    pub fn qubits(self) -> &'static [usize] {
        match self {
            Self::Q1 => &[1],
            Self::Q2 => &[2],
            Self::All => &[1, 2],
        }
    }
}

impl std::fmt::Display for Targets {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Q1 => "q1",
            Self::Q2 => "q2",
            Self::All => "all",
        })
    }
}

/// Delay duration, either literal seconds or the `1/(2J)` expression resolved
/// at compile time against the active J coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DelayExpr {
    Seconds(f64),
    HalfInverseJ,
}

impl std::fmt::Display for DelayExpr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Seconds(s) => write!(f, "{s}"),
            Self::HalfInverseJ => f.write_str("1/(2J)"),
        }
    }
}

/// One statement of a pulse program.
#[derive(Debug, Clone, PartialEq)]
pub enum Segment {
    Pulse {
        axis: PulseAxis,
        /// Flip angle in radians, strictly positive.
        flip_angle: f64,
        targets: Targets,
    },
    Delay {
        expr: DelayExpr,
    },
}

impl Segment {
    fn structurally_eq(&self, other: &Self) -> bool {
        match (self, other) {
            (
                Self::Pulse {
                    axis: a1,
                    flip_angle: f1,
                    targets: t1,
                },
                Self::Pulse {
                    axis: a2,
                    flip_angle: f2,
                    targets: t2,
                },
            ) => a1 == a2 && t1 == t2 && (f1 - f2).abs() <= 1e-12 * f1.abs().max(1.0),
            (Self::Delay { expr: e1 }, Self::Delay { expr: e2 }) => e1 == e2,
            _ => false,
        }
    }
}

#[derive(Debug, Error)]
pub enum SequenceError {
    #[error("pulse sequence must contain at least one segment")]
    Empty,
    #[error("pulse flip angle must be positive, got {0}")]
    NonPositiveAngle(f64),
    #[error("delay duration must be non-negative, got {0}")]
    NegativeDuration(f64),
}

/// Ordered, non-empty pulse program.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSequence {
    name: String,
    segments: Vec<Segment>,
}

impl PulseSequence {
    pub fn new(name: impl Into<String>, segments: Vec<Segment>) -> Result<Self, SequenceError> {
        if segments.is_empty() {
            return Err(SequenceError::Empty);
        }
        for seg in &segments {
            match seg {
                Segment::Pulse { flip_angle, .. } => {
                    if !flip_angle.is_finite() || *flip_angle <= 0.0 {
                        return Err(SequenceError::NonPositiveAngle(*flip_angle));
                    }
                }
                Segment::Delay {
                    expr: DelayExpr::Seconds(s),
                } => {
                    if !s.is_finite() || *s < 0.0 {
                        return Err(SequenceError::NegativeDuration(*s));
                    }
                }
                Segment::Delay {
                    expr: DelayExpr::HalfInverseJ,
                } => {}
            }
        }
        Ok(Self {
            name: name.into(),
            segments,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Sum of all pulse flip angles (rad).
    pub fn total_flip_angle(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| match s {
                Segment::Pulse { flip_angle, .. } => *flip_angle,
                Segment::Delay { .. } => 0.0,
            })
            .sum()
    }

    /// Total time spent pulsing at drive amplitude `omega1`, excluding delays:
    /// the sum of per-pulse durations `flip_angle / ω₁`.
    pub fn total_pulse_time(&self, omega1: f64) -> f64 {
        self.segments
            .iter()
            .map(|s| match s {
                Segment::Pulse { flip_angle, .. } => flip_angle / omega1,
                Segment::Delay { .. } => 0.0,
            })
            .sum()
    }

    /// Structural equality: exact on every discrete field, flip angles within
    /// 1e−12 relative (the degree↔radian conversion in print/parse costs a
    /// couple of ulps).
    pub fn structurally_eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.segments.len() == other.segments.len()
            && self
                .segments
                .iter()
                .zip(&other.segments)
                .all(|(a, b)| a.structurally_eq(b))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParseErrorKind {
    UnknownKeyword(String),
    UnknownAxis(String),
    UnknownTarget(String),
    InvalidNumber(String),
    NonPositiveAngle(f64),
    NegativeDuration(f64),
    MissingField(&'static str),
    TrailingTokens(String),
    EmptySequence,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}, column {column}: {}", kind_message(.kind))]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

fn kind_message(kind: &ParseErrorKind) -> String {
    match kind {
        ParseErrorKind::UnknownKeyword(t) => {
            format!("unknown statement {t:?} (expected pulse or delay)")
        }
        ParseErrorKind::UnknownAxis(t) => format!("unknown axis {t:?} (expected x, y, -x or -y)"),
        ParseErrorKind::UnknownTarget(t) => {
            format!("unknown target {t:?} (expected q1, q2 or all)")
        }
        ParseErrorKind::InvalidNumber(t) => format!("invalid number {t:?}"),
        ParseErrorKind::NonPositiveAngle(v) => format!("flip angle must be positive, got {v}"),
        ParseErrorKind::NegativeDuration(v) => format!("delay must be non-negative, got {v}"),
        ParseErrorKind::MissingField(f) => format!("missing field: {f}"),
        ParseErrorKind::TrailingTokens(t) => format!("unexpected trailing token {t:?}"),
        ParseErrorKind::EmptySequence => "program contains no statements".to_string(),
    }
}

/// Parse a pulse program.
///
/// A comment of the form `# name: <text>` sets the sequence name (the printer
/// emits one, so print → parse round-trips the name too).
pub fn parse(text: &str) -> Result<PulseSequence, ParseError> {
    let mut name: Option<String> = None;
    let mut segments = Vec::new();
    let mut last_line = 1;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let trimmed = raw.trim_start();
        if let Some(comment) = trimmed.strip_prefix('#') {
            if name.is_none() {
                if let Some(rest) = comment.trim_start().strip_prefix("name:") {
                    let candidate = rest.trim();
                    if !candidate.is_empty() {
                        name = Some(candidate.to_string());
                    }
                }
            }
            continue;
        }
        let effective = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let tokens = tokenize(effective);
        if tokens.is_empty() {
            continue;
        }
        segments.push(parse_statement(&tokens, line_no, effective)?);
    }
    if segments.is_empty() {
        return Err(ParseError {
            line: last_line,
            column: 1,
            kind: ParseErrorKind::EmptySequence,
        });
    }
    PulseSequence::new(name.unwrap_or_else(|| "sequence".to_string()), segments).map_err(|_| {
        ParseError {
            line: last_line,
            column: 1,
            kind: ParseErrorKind::EmptySequence,
        }
    })
}

/// Render a sequence back to program text; `parse(print(seq))` is
/// structurally equal to `seq`.
pub fn print(seq: &PulseSequence) -> String {
    let mut out = format!("# name: {}\n", seq.name());
    for seg in seq.segments() {
        match seg {
            Segment::Pulse {
                axis,
                flip_angle,
                targets,
            } => {
                out.push_str(&format!(
                    "pulse {axis} {} {targets}\n",
                    flip_angle.to_degrees()
                ));
            }
            Segment::Delay { expr } => {
                out.push_str(&format!("delay {expr}\n"));
            }
        }
    }
    out
}

fn tokenize(line: &str) -> Vec<(usize, &str)> {
    let mut tokens = Vec::new();
    let mut col = 0usize;
    let mut start_byte: Option<usize> = None;
    let mut start_col = 0usize;
    for (byte_idx, ch) in line.char_indices() {
        col += 1;
        if ch.is_whitespace() {
            if let Some(sb) = start_byte.take() {
                tokens.push((start_col, &line[sb..byte_idx]));
            }
        } else if start_byte.is_none() {
            start_byte = Some(byte_idx);
            start_col = col;
        }
    }
    if let Some(sb) = start_byte {
        tokens.push((start_col, &line[sb..]));
    }
    tokens
}

fn parse_statement(
    tokens: &[(usize, &str)],
    line: usize,
    line_text: &str,
) -> Result<Segment, ParseError> {
    let eol_col = line_text.chars().count() + 1;
    let err = |column: usize, kind: ParseErrorKind| ParseError { line, column, kind };
    let field = |index: usize, what: &'static str| -> Result<(usize, &str), ParseError> {
        tokens
            .get(index)
            .copied()
            .ok_or_else(|| err(eol_col, ParseErrorKind::MissingField(what)))
    };
    let no_trailing = |from: usize| -> Result<(), ParseError> {
        match tokens.get(from) {
            Some(&(col, tok)) => Err(err(col, ParseErrorKind::TrailingTokens(tok.to_string()))),
            None => Ok(()),
        }
    };

    let (kw_col, keyword) = tokens[0];
    match keyword {
        "pulse" => {
            let (axis_col, axis_tok) = field(1, "axis")?;
            let axis = match axis_tok {
                "x" => PulseAxis::X,
                "y" => PulseAxis::Y,
                "-x" => PulseAxis::MinusX,
                "-y" => PulseAxis::MinusY,
                other => {
                    return Err(err(
                        axis_col,
                        ParseErrorKind::UnknownAxis(other.to_string()),
                    ))
                }
            };
            let (angle_col, angle_tok) = field(2, "flip angle (degrees)")?;
            let degrees: f64 = angle_tok.parse().map_err(|_| {
                err(
                    angle_col,
                    ParseErrorKind::InvalidNumber(angle_tok.to_string()),
                )
            })?;
            if !degrees.is_finite() {
                return Err(err(
                    angle_col,
                    ParseErrorKind::InvalidNumber(angle_tok.to_string()),
                ));
            }
            if degrees <= 0.0 {
                return Err(err(angle_col, ParseErrorKind::NonPositiveAngle(degrees)));
            }
            let (target_col, target_tok) = field(3, "target")?;
            let targets = match target_tok {
                "q1" => Targets::Q1,
                "q2" => Targets::Q2,
                "all" => Targets::All,
                other => {
                    return Err(err(
                        target_col,
                        ParseErrorKind::UnknownTarget(other.to_string()),
                    ))
                }
            };
            no_trailing(4)?;
            Ok(Segment::Pulse {
                axis,
                flip_angle: degrees.to_radians(),
                targets,
            })
        }
        "delay" => {
            let (dur_col, dur_tok) = field(1, "duration")?;
            let expr = if dur_tok == "1/(2J)" {
                DelayExpr::HalfInverseJ
            } else {
                let seconds: f64 = dur_tok.parse().map_err(|_| {
                    err(dur_col, ParseErrorKind::InvalidNumber(dur_tok.to_string()))
                })?;
                if !seconds.is_finite() {
                    return Err(err(
                        dur_col,
                        ParseErrorKind::InvalidNumber(dur_tok.to_string()),
                    ));
                }
                if seconds < 0.0 {
                    return Err(err(dur_col, ParseErrorKind::NegativeDuration(seconds)));
                }
                DelayExpr::Seconds(seconds)
            };
            no_trailing(2)?;
            Ok(Segment::Delay { expr })
        }
        other => Err(err(
            kw_col,
            ParseErrorKind::UnknownKeyword(other.to_string()),
        )),
    }
}

/// Built-in conditional sign-flip sequence for a basis-state target.
///
/// The diagonal sign flip factors into per-qubit z rotations by ±π/4 plus a
/// σz⊗σz conditional phase of −π/4, realized here with transverse pulses
/// only: each z rotation is the composite X(90°)·Y(±90°)·X(−90°), and the
/// conditional phase is one free-evolution delay of 1/(2J). Up to a global
/// phase the compiled unitary is −1 on the target state and +1 elsewhere.
pub fn oracle_sequence(target: BasisLabel) -> PulseSequence {
    let (t1, t2) = target.z_signs();
    // With the delay's conditional phase fixed at −π/4, the per-qubit
    // rotation signs flip for the even-parity targets (00, 11).
    let (b1, b2) = if t1 * t2 > 0.0 { (-t1, -t2) } else { (t1, t2) };

    let quarter = 90.0f64.to_radians();
    let composite = |qubit: Targets, beta_sign: f64| {
        let y_axis = if beta_sign > 0.0 {
            PulseAxis::Y
        } else {
            PulseAxis::MinusY
        };
        [
            Segment::Pulse {
                axis: PulseAxis::X,
                flip_angle: quarter,
                targets: qubit,
            },
            Segment::Pulse {
                axis: y_axis,
                flip_angle: quarter,
                targets: qubit,
            },
            Segment::Pulse {
                axis: PulseAxis::MinusX,
                flip_angle: quarter,
                targets: qubit,
            },
        ]
    };

    let mut segments = Vec::with_capacity(7);
    segments.extend(composite(Targets::Q1, b1));
    segments.extend(composite(Targets::Q2, b2));
    segments.push(Segment::Delay {
        expr: DelayExpr::HalfInverseJ,
    });

    PulseSequence::new(format!("signflip-{target}"), segments)
        .expect("built-in sequence is non-empty and well-formed")
}
