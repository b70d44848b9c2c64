use thiserror::Error;

use crate::choice::ProductId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("assortment references unknown product {0}")]
    UnknownProduct(ProductId),

    #[error("assortment contains product {0} more than once")]
    DuplicateMember(ProductId),

    #[error("product {0} is not offered in the assortment")]
    InvalidChoice(ProductId),

    #[error("duplicate product id {0}")]
    DuplicateId(ProductId),

    #[error("product {id} has nonpositive weight {weight}")]
    NonPositiveWeight { id: ProductId, weight: f64 },

    #[error("product {id} has negative price {price}")]
    NegativePrice { id: ProductId, price: f64 },

    #[error("product ids must be exactly 1..={n}; found {id}")]
    IdOutOfRange { id: ProductId, n: usize },

    #[error("schema violation: {0}")]
    Schema(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid noise specification: {0}")]
    Noise(String),

    #[error("invalid generator range: {0}")]
    Range(String),

    #[error("enumeration of {count} assortments exceeds the cap of {cap}")]
    EnumerationCap { count: u128, cap: u64 },

    #[error("top set B_S(u) is empty at u = {0}; i_S(u) is undefined")]
    EmptyTopSet(f64),

    #[error("malformed trace: {0}")]
    MalformedTrace(String),

    #[error("revenue oracle failed: {0}")]
    Oracle(String),

    #[error("check failed: {0}")]
    Assertion(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable machine-readable code, used in CLI error JSON and the C ABI.
    pub fn code(&self) -> &'static str {
        match self {
            Error::UnknownProduct(_) => "unknown_product",
            Error::DuplicateMember(_) => "duplicate_member",
            Error::InvalidChoice(_) => "invalid_choice",
            Error::DuplicateId(_) => "duplicate_id",
            Error::NonPositiveWeight { .. } => "nonpositive_weight",
            Error::NegativePrice { .. } => "negative_price",
            Error::IdOutOfRange { .. } => "id_out_of_range",
            Error::Schema(_) => "schema_violation",
            Error::Config(_) => "invalid_config",
            Error::Noise(_) => "invalid_noise",
            Error::Range(_) => "invalid_range",
            Error::EnumerationCap { .. } => "enumeration_cap",
            Error::EmptyTopSet(_) => "empty_top_set",
            Error::MalformedTrace(_) => "malformed_trace",
            Error::Oracle(_) => "oracle_failure",
            Error::Assertion(_) => "assertion_failure",
            Error::Io { .. } => "io",
        }
    }

    /// Process exit code: 3 validation, 4 assertion failure, 5 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Assertion(_) => 4,
            Error::Io { .. } => 5,
            _ => 3,
        }
    }
}
