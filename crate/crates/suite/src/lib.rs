//! Holder crate for the acceptance test target; see `proxlab::suite`.
