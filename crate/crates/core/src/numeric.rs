use std::sync::LazyLock;

use regex::Regex;

static NUMBER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"^(?P<prefix>[$€£¥]\s?)?(?P<sign>-)?(?P<int>\d{1,3}(?:,\d{3})+|\d+)(?:\.(?P<dec>\d+))?(?P<suffix>\s?[A-Za-z%²³]+(?:\s[A-Za-z%²³]+)*)?$",
    )
    .expect("valid regex")
});

/// A number embedded in display text, such as `$1,250,000`, `135 lbs` or `1.2 kg`.
/// Formatting a new value reuses the prefix, suffix, decimal count and
/// thousands separators of the parsed original.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericValue {
    pub prefix: String,
    pub value: f64,
    pub decimals: usize,
    pub grouped: bool,
    pub suffix: String,
}

impl NumericValue {
    pub fn parse(raw: &str) -> Option<Self> {
        let c = NUMBER.captures(raw.trim())?;
        let int = c.name("int")?.as_str();
        let dec = c.name("dec").map(|m| m.as_str()).unwrap_or("");
        let digits = if dec.is_empty() {
            int.replace(',', "")
        } else {
            format!("{}.{dec}", int.replace(',', ""))
        };
        let mut value: f64 = digits.parse().ok()?;
        if c.name("sign").is_some() {
            value = -value;
        }
        Some(Self {
            prefix: c.name("prefix").map(|m| m.as_str().to_string()).unwrap_or_default(),
            value,
            decimals: dec.len(),
            grouped: int.contains(','),
            suffix: c.name("suffix").map(|m| m.as_str().to_string()).unwrap_or_default(),
        })
    }

    /// Renders `value` in this number's style.
    pub fn format(&self, value: f64) -> String {
        let body = format!("{:.*}", self.decimals, value.abs());
        let (int, frac) = match body.split_once('.') {
            Some((i, f)) => (i.to_string(), Some(f.to_string())),
            None => (body, None),
        };
        let int = if self.grouped { group_thousands(&int) } else { int };
        let sign = if value < 0.0 { "-" } else { "" };
        match frac {
            Some(f) => format!("{}{sign}{int}.{f}{}", self.prefix, self.suffix),
            None => format!("{}{sign}{int}{}", self.prefix, self.suffix),
        }
    }
}

fn group_thousands(int: &str) -> String {
    let mut out = String::with_capacity(int.len() + int.len() / 3);
    for (i, ch) in int.chars().enumerate() {
        if i > 0 && (int.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

/// Number of digits in the integer part of `|v|`.
pub fn integer_digits(v: f64) -> u32 {
    let a = v.abs().trunc();
    if a < 1.0 {
        1
    } else {
        a.log10().floor() as u32 + 1
    }
}

/// Keeps the three most significant digits: 123456 → 123000.
pub fn round_to_three_significant(v: f64) -> f64 {
    let digits = integer_digits(v);
    if digits <= 3 {
        return v;
    }
    let scale = 10f64.powi(digits as i32 - 3);
    (v / scale).round() * scale
}

/// Rounds to `decimals` places, then applies three-significant-digit rounding
/// to values with five or more integer digits.
pub fn round_like(v: f64, decimals: usize) -> f64 {
    if integer_digits(v) >= 5 {
        return round_to_three_significant(v);
    }
    let scale = 10f64.powi(decimals as i32);
    (v * scale).round() / scale
}
