use serde_json::Value;

/// Rounds report numbers to a fixed count of significant digits.
#[derive(Debug, Clone, Copy)]
pub struct Fmt {
    pub digits: u8,
}

impl Fmt {
    pub fn num(&self, x: f64) -> Value {
        if !x.is_finite() {
            return Value::Null;
        }
        let rounded: f64 = format!("{:.*e}", usize::from(self.digits.max(1)) - 1, x)
            .parse()
            .expect("formatted float parses");
        // avoid printing -0
        let rounded = if rounded == 0.0 { 0.0 } else { rounded };
        serde_json::Number::from_f64(rounded).map_or(Value::Null, Value::Number)
    }

    pub fn list(&self, xs: &[f64]) -> Value {
        Value::Array(xs.iter().map(|&x| self.num(x)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        let f = Fmt { digits: 6 };
        assert_eq!(f.num(0.311278124459), serde_json::json!(0.311278));
        assert_eq!(f.num(1234567.0), serde_json::json!(1234570.0));
        assert_eq!(f.num(-1e-20), serde_json::json!(-1e-20));
        assert_eq!(f.num(f64::NAN), Value::Null);
        assert_eq!(Fmt { digits: 17 }.num(0.1 + 0.2), serde_json::json!(0.1 + 0.2));
        assert_eq!(f.num(-0.0).to_string(), "0.0");
    }
}
