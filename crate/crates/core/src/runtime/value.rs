use std::any::Any;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::schema::{RouteParam, ValueType};

/// A non-primitive value produced by a [`Converter`].
#[derive(Clone)]
pub struct CustomValue {
    pub type_name: String,
    pub inner: Arc<dyn Any + Send + Sync>,
}

impl fmt::Debug for CustomValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CustomValue({})", self.type_name)
    }
}

/// A handler argument or result.
#[derive(Debug, Clone)]
pub enum Value {
    Int(i32),
    Long(i64),
    Float(f32),
    Double(f64),
    Boolean(bool),
    Str(String),
    Unit,
    Custom(CustomValue),
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Self::Int(a), Self::Int(b)) => a == b,
            (Self::Long(a), Self::Long(b)) => a == b,
            (Self::Float(a), Self::Float(b)) => a.to_bits() == b.to_bits(),
            (Self::Double(a), Self::Double(b)) => a.to_bits() == b.to_bits(),
            (Self::Boolean(a), Self::Boolean(b)) => a == b,
            (Self::Str(a), Self::Str(b)) => a == b,
            (Self::Unit, Self::Unit) => true,
            (Self::Custom(a), Self::Custom(b)) => a.type_name == b.type_name && Arc::ptr_eq(&a.inner, &b.inner),
            _ => false,
        }
    }
}

impl Value {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            Self::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match *self {
            Self::Int(n) => Some(n.into()),
            Self::Long(n) => Some(n),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Self::Float(x) => Some(x.into()),
            Self::Double(x) => Some(x),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match *self {
            Self::Boolean(b) => Some(b),
            _ => None,
        }
    }

    pub fn downcast<T: Any>(&self) -> Option<&T> {
        match self {
            Self::Custom(c) => c.inner.downcast_ref(),
            _ => None,
        }
    }
}

/// Textual conversion for a non-primitive type, registered per type name.
pub trait Converter: Send + Sync {
    fn decode(&self, raw: &str) -> Result<Value, String>;
    fn encode(&self, value: &Value) -> Option<String>;
}

pub type Converters = BTreeMap<String, Arc<dyn Converter>>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParamError {
    #[error("MissingParam({0})")]
    MissingParam(String),
    #[error("TypeMismatch({name}, {ty}, {raw:?})")]
    TypeMismatch { name: String, ty: String, raw: String },
}

fn is_decimal_float(raw: &str) -> bool {
    // Rust's float parser also takes "inf"/"NaN"; only digits, sign, point
    // and exponent are accepted here.
    !raw.is_empty()
        && raw.bytes().any(|b| b.is_ascii_digit())
        && raw
            .bytes()
            .all(|b| b.is_ascii_digit() || matches!(b, b'+' | b'-' | b'.' | b'e' | b'E'))
}

/// Parses one raw string as the given type.
pub fn decode_value(ty: &ValueType, raw: &str, converters: &Converters) -> Result<Value, String> {
    let bad = || format!("not a valid {ty}");
    match ty {
        ValueType::Int => raw.parse().map(Value::Int).map_err(|_| bad()),
        ValueType::Long => raw.parse().map(Value::Long).map_err(|_| bad()),
        ValueType::Float if is_decimal_float(raw) => raw
            .parse::<f32>()
            .ok()
            .filter(|x| x.is_finite())
            .map(Value::Float)
            .ok_or_else(bad),
        ValueType::Double if is_decimal_float(raw) => raw
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .map(Value::Double)
            .ok_or_else(bad),
        ValueType::Float | ValueType::Double => Err(bad()),
        ValueType::Boolean => match raw {
            "true" => Ok(Value::Boolean(true)),
            "false" => Ok(Value::Boolean(false)),
            _ => Err(bad()),
        },
        ValueType::String => Ok(Value::Str(raw.to_string())),
        ValueType::Unit => Err(bad()),
        ValueType::Custom(name) => match converters.get(name) {
            Some(conv) => conv.decode(raw),
            None => Err(format!("no converter registered for {name}")),
        },
    }
}

/// Converts raw request strings into typed handler arguments, in signature
/// order.
pub fn deserialize_params(
    sig: &[RouteParam],
    raw: &BTreeMap<String, String>,
    converters: &Converters,
) -> Result<Vec<Value>, ParamError> {
    sig.iter()
        .map(|p| {
            let text = raw
                .get(&p.name)
                .ok_or_else(|| ParamError::MissingParam(p.name.clone()))?;
            decode_value(&p.ty, text, converters).map_err(|_| ParamError::TypeMismatch {
                name: p.name.clone(),
                ty: p.ty.to_string(),
                raw: text.clone(),
            })
        })
        .collect()
}

/// Text form of a handler result. `None` for `Unit` and for custom values
/// without an encoding converter.
pub fn render_value(value: &Value, converters: &Converters) -> Option<String> {
    match value {
        Value::Int(n) => Some(n.to_string()),
        Value::Long(n) => Some(n.to_string()),
        // `Display` for floats is the shortest string that parses back to
        // the same value.
        Value::Float(x) => Some(x.to_string()),
        Value::Double(x) => Some(x.to_string()),
        Value::Boolean(b) => Some(b.to_string()),
        Value::Str(s) => Some(s.clone()),
        Value::Unit => None,
        Value::Custom(c) => converters.get(&c.type_name)?.encode(value),
    }
}
