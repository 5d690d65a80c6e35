//! Decibel conversions. Every dB <-> linear conversion in the crate goes
//! through these helpers.

/// Power ratio in dB to linear scale.
#[inline]
pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Linear power ratio to dB.
#[inline]
pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

#[inline]
pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_lin(dbm - 30.0)
}

#[inline]
pub fn watts_to_dbm(w: f64) -> f64 {
    lin_to_db(w) + 30.0
}
