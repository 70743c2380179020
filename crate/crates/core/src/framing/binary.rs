use super::FramingError;

/// Minimal base-2 text of `n`, most significant bit first.
///
/// Zero yields the empty string: the conversion loop only runs while bits
/// remain.
pub fn convert_to_bin(n: i32) -> Result<String, FramingError> {
    if n < 0 {
        return Err(FramingError::NegativeInput(n.into()));
    }
    let mut x = n;
    let mut bits = Vec::with_capacity(31);
    while x != 0 {
        bits.push(if x & 1 == 1 { '1' } else { '0' });
        x >>= 1;
    }
    bits.reverse();
    Ok(bits.into_iter().collect())
}
