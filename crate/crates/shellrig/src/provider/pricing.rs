//! Exact monetary-cost accounting.
//!
//! Prices are USD per million tokens. All arithmetic is exact rational;
//! rounding to 2 decimals happens only when a report is emitted, so
//! accumulation error can never change a reported figure.

use std::collections::BTreeMap;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign};
use std::path::Path;
use std::str::FromStr;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::TokenUsage;

/// Errors from pricing-table loading and cost computation.
#[derive(Debug, thiserror::Error)]
pub enum PricingError {
    #[error("unknown model: {0}")]
    UnknownModel(String),
    #[error("malformed pricing table: {0}")]
    Malformed(String),
    #[error("price must be non-negative, got {0} for {1}")]
    NegativePrice(String, String),
    #[error("cannot read pricing table: {0}")]
    Io(#[from] std::io::Error),
}

/// An exact USD amount.
///
/// Displays as an exact terminating decimal (cost denominators are always
/// powers of ten); [`Cost::rounded_2dp`] gives the report form, rounded
/// half-up to cents.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Cost(BigRational);

impl Cost {
    pub fn zero() -> Self {
        Cost(BigRational::zero())
    }

    pub fn as_rational(&self) -> &BigRational {
        &self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Exact decimal string, trailing zeros trimmed (`"2.25"`, `"0.0003"`, `"3"`).
    pub fn to_decimal_string(&self) -> String {
        render_exact_decimal(&self.0)
    }

    /// Exact mean of a set of costs; zero for an empty slice.
    pub fn mean_of(costs: &[Cost]) -> Cost {
        if costs.is_empty() {
            return Cost::zero();
        }
        let total = costs
            .iter()
            .fold(BigRational::zero(), |acc, cost| acc + &cost.0);
        Cost(total / BigRational::from_integer(BigInt::from(costs.len())))
    }

    /// Rounded half-up to 2 decimals, as printed in reports (`"2.25"`, `"3.00"`).
    pub fn rounded_2dp(&self) -> String {
        let cents = (&self.0 * BigRational::from_integer(BigInt::from(100)))
            .round()
            .to_integer();
        let sign = if cents.is_negative() { "-" } else { "" };
        let cents = cents.abs();
        let whole = &cents / BigInt::from(100);
        let frac = (&cents % BigInt::from(100)).to_i64().unwrap_or(0);
        format!("{sign}{whole}.{frac:02}")
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_decimal_string())
    }
}

impl Add for Cost {
    type Output = Cost;

    fn add(self, rhs: Cost) -> Cost {
        Cost(self.0 + rhs.0)
    }
}

impl AddAssign for Cost {
    fn add_assign(&mut self, rhs: Cost) {
        self.0 += rhs.0;
    }
}

impl Sum for Cost {
    fn sum<I: Iterator<Item = Cost>>(iter: I) -> Cost {
        iter.fold(Cost::zero(), Add::add)
    }
}

impl Serialize for Cost {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_decimal_string())
    }
}

impl<'de> Deserialize<'de> for Cost {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Cost, D::Error> {
        let s = String::deserialize(deserializer)?;
        parse_decimal(&s)
            .map(Cost)
            .ok_or_else(|| serde::de::Error::custom(format!("not a decimal amount: {s}")))
    }
}

/// Per-million-token prices for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelPricing {
    pub input_per_million: BigRational,
    pub output_per_million: BigRational,
}

/// Model-name → prices table, loaded from a JSON file.
///
/// Format: `{"model-id": {"input": "3.00", "output": "15.00"}}`. Prices may
/// be JSON strings (preferred — exact) or JSON numbers, which are converted
/// through their shortest decimal rendering, so `0.1` means exactly 1/10.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PricingTable {
    models: BTreeMap<String, ModelPricing>,
}

impl PricingTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        model: impl Into<String>,
        input_price: &str,
        output_price: &str,
    ) -> Result<(), PricingError> {
        let model = model.into();
        let input = parse_price(input_price, &model)?;
        let output = parse_price(output_price, &model)?;
        self.models.insert(
            model,
            ModelPricing {
                input_per_million: input,
                output_per_million: output,
            },
        );
        Ok(())
    }

    pub fn get(&self, model: &str) -> Option<&ModelPricing> {
        self.models.get(model)
    }

    pub fn models(&self) -> impl Iterator<Item = &str> {
        self.models.keys().map(String::as_str)
    }

    pub fn from_json(json: &str) -> Result<Self, PricingError> {
        let raw: BTreeMap<String, BTreeMap<String, serde_json::Value>> =
            serde_json::from_str(json).map_err(|e| PricingError::Malformed(e.to_string()))?;
        let mut table = PricingTable::new();
        for (model, prices) in raw {
            let field = |name: &str| -> Result<String, PricingError> {
                let v = prices.get(name).ok_or_else(|| {
                    PricingError::Malformed(format!("model {model}: missing \"{name}\" price"))
                })?;
                match v {
                    serde_json::Value::String(s) => Ok(s.clone()),
                    serde_json::Value::Number(n) => Ok(n.to_string()),
                    other => Err(PricingError::Malformed(format!(
                        "model {model}: \"{name}\" must be a string or number, got {other}"
                    ))),
                }
            };
            let input = field("input")?;
            let output = field("output")?;
            table.insert(model, &input, &output)?;
        }
        Ok(table)
    }

    pub fn from_file(path: &Path) -> Result<Self, PricingError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Exact cost of `usage` under `model`.
    pub fn cost(&self, usage: TokenUsage, model: &str) -> Result<Cost, PricingError> {
        let pricing = self
            .models
            .get(model)
            .ok_or_else(|| PricingError::UnknownModel(model.to_string()))?;
        let million = BigRational::from_integer(BigInt::from(1_000_000));
        let input = BigRational::from_integer(BigInt::from(usage.input_tokens));
        let output = BigRational::from_integer(BigInt::from(usage.output_tokens));
        Ok(Cost(
            (input * &pricing.input_per_million + output * &pricing.output_per_million) / million,
        ))
    }
}

fn parse_price(s: &str, model: &str) -> Result<BigRational, PricingError> {
    let price = parse_decimal(s)
        .ok_or_else(|| PricingError::Malformed(format!("model {model}: not a decimal: {s}")))?;
    if price.is_negative() {
        return Err(PricingError::NegativePrice(s.to_string(), model.to_string()));
    }
    Ok(price)
}

/// Parse a decimal literal (`-12.50`, `.5`, `3e-2`) into an exact rational.
pub(crate) fn parse_decimal(s: &str) -> Option<BigRational> {
    let s = s.trim();
    let (negative, rest) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (mantissa, exp) = match rest.split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse::<i64>().ok()?),
        None => (rest, 0i64),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().all(|b| b.is_ascii_digit()) || !frac_part.bytes().all(|b| b.is_ascii_digit())
    {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let mut numer = BigInt::from_str(&digits).ok()?;
    if negative {
        numer = -numer;
    }
    let shift = exp.checked_sub(frac_part.len() as i64)?;
    let ten = BigInt::from(10);
    if shift >= 0 {
        numer *= num::pow::pow(ten, shift as usize);
        Some(BigRational::from_integer(numer))
    } else {
        Some(BigRational::new(numer, num::pow::pow(ten, (-shift) as usize)))
    }
}

/// Render a rational with a power-of-ten denominator as an exact decimal.
///
/// Falls back to `n/d` notation for non-terminating ratios (unreachable for
/// costs, whose denominators always divide a power of ten).
fn render_exact_decimal(r: &BigRational) -> String {
    let r = r.reduced();
    let sign = if r.is_negative() { "-" } else { "" };
    let numer = r.numer().abs();
    let denom = r.denom().abs();

    let mut twos = 0u32;
    let mut fives = 0u32;
    let mut rest = denom.clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    while (&rest % &two).is_zero() {
        rest /= &two;
        twos += 1;
    }
    while (&rest % &five).is_zero() {
        rest /= &five;
        fives += 1;
    }
    if !rest.is_one() {
        return format!("{sign}{numer}/{denom}");
    }

    let k = twos.max(fives);
    let scaled = numer * num::pow::pow(BigInt::from(10), k as usize) / denom;
    let digits = scaled.to_string();
    if k == 0 {
        return format!("{sign}{digits}");
    }
    let k = k as usize;
    let padded = format!("{digits:0>width$}", width = k + 1);
    let (whole, frac) = padded.split_at(padded.len() - k);
    let frac = frac.trim_end_matches('0');
    if frac.is_empty() {
        format!("{sign}{whole}")
    } else {
        format!("{sign}{whole}.{frac}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::compute_cost;

    fn table() -> PricingTable {
        let mut t = PricingTable::new();
        t.insert("test-model", "3.00", "15.00").unwrap();
        t
    }

    #[test]
    fn zero_usage_costs_nothing() {
        let cost = compute_cost(TokenUsage::new(0, 0), "test-model", &table()).unwrap();
        assert_eq!(cost, Cost::zero());
        assert_eq!(cost.rounded_2dp(), "0.00");
    }

    #[test]
    fn one_million_input_tokens_cost_the_input_price() {
        let cost = compute_cost(TokenUsage::new(1_000_000, 0), "test-model", &table()).unwrap();
        assert_eq!(cost.to_decimal_string(), "3");
        assert_eq!(cost.rounded_2dp(), "3.00");
    }

    #[test]
    fn mixed_usage_hand_arithmetic() {
        // 250k · 3/1e6 + 100k · 15/1e6 = 0.75 + 1.50 = 2.25
        let cost = compute_cost(TokenUsage::new(250_000, 100_000), "test-model", &table()).unwrap();
        assert_eq!(cost.to_decimal_string(), "2.25");
    }

    #[test]
    fn unknown_model_is_an_error() {
        assert!(matches!(
            compute_cost(TokenUsage::new(1, 1), "nope", &table()),
            Err(PricingError::UnknownModel(_))
        ));
    }

    #[test]
    fn cost_is_additive_exactly() {
        let t = table();
        let a = TokenUsage::new(123_457, 891);
        let b = TokenUsage::new(7, 999_993);
        let sum = compute_cost(a + b, "test-model", &t).unwrap();
        let parts = compute_cost(a, "test-model", &t).unwrap()
            + compute_cost(b, "test-model", &t).unwrap();
        assert_eq!(sum, parts);
    }

    #[test]
    fn decimal_parsing_is_exact() {
        let tenth = parse_decimal("0.1").unwrap();
        assert_eq!(tenth, BigRational::new(BigInt::from(1), BigInt::from(10)));
        assert_eq!(parse_decimal("3.00").unwrap(), BigRational::from_integer(BigInt::from(3)));
        assert_eq!(
            parse_decimal("2e-3").unwrap(),
            BigRational::new(BigInt::from(2), BigInt::from(1000))
        );
        assert_eq!(
            parse_decimal("-.5").unwrap(),
            BigRational::new(BigInt::from(-1), BigInt::from(2))
        );
        assert!(parse_decimal("abc").is_none());
        assert!(parse_decimal("").is_none());
        assert!(parse_decimal("1.2.3").is_none());
    }

    #[test]
    fn json_number_prices_mean_their_decimal_rendering() {
        let t = PricingTable::from_json(r#"{"m": {"input": 0.1, "output": 15}}"#).unwrap();
        let cost = t.cost(TokenUsage::new(10_000_000, 0), "m").unwrap();
        // 10 million tokens at exactly 0.1 per million = exactly 1, not 0.000001·f64(0.1)·1e7.
        assert_eq!(cost.to_decimal_string(), "1");
    }

    #[test]
    fn negative_prices_are_rejected() {
        let err = PricingTable::from_json(r#"{"m": {"input": "-1", "output": "0"}}"#);
        assert!(matches!(err, Err(PricingError::NegativePrice(..))));
    }

    #[test]
    fn rounding_is_half_up_at_emission_only() {
        let mut t = PricingTable::new();
        t.insert("m", "5.00", "0").unwrap();
        // 1000 tokens · 5/1e6 = 0.005 → rounds up to 0.01.
        let cost = t.cost(TokenUsage::new(1000, 0), "m").unwrap();
        assert_eq!(cost.to_decimal_string(), "0.005");
        assert_eq!(cost.rounded_2dp(), "0.01");
        // 800 tokens · 5/1e6 = 0.004 → rounds down.
        let cost = t.cost(TokenUsage::new(800, 0), "m").unwrap();
        assert_eq!(cost.rounded_2dp(), "0.00");
    }

    #[test]
    fn exact_decimal_rendering_covers_awkward_denominators() {
        assert_eq!(render_exact_decimal(&parse_decimal("0.0000001").unwrap()), "0.0000001");
        assert_eq!(render_exact_decimal(&parse_decimal("-12.340").unwrap()), "-12.34");
        assert_eq!(render_exact_decimal(&BigRational::new(BigInt::from(1), BigInt::from(3))), "1/3");
    }

    #[test]
    fn cost_serde_round_trips() {
        let cost = compute_cost(TokenUsage::new(250_000, 100_000), "test-model", &table()).unwrap();
        let json = serde_json::to_string(&cost).unwrap();
        assert_eq!(json, "\"2.25\"");
        let back: Cost = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cost);
    }
}
