//! Human-scale unit conversions. Internally sizes are bits and times seconds;
//! 1 byte = 8 bits and MB/Mbit are decimal (10^6).

pub const BITS_PER_BYTE: f64 = 8.0;

pub fn gbps_to_bps(gbps: f64) -> f64 {
    gbps * 1e9
}

pub fn bps_to_gbps(bps: f64) -> f64 {
    bps / 1e9
}

pub fn us_to_s(us: f64) -> f64 {
    us / 1e6
}

pub fn s_to_us(s: f64) -> f64 {
    s * 1e6
}

pub fn ms_to_s(ms: f64) -> f64 {
    ms / 1e3
}

pub fn s_to_ms(s: f64) -> f64 {
    s * 1e3
}

pub fn mbit_to_bits(mbit: f64) -> f64 {
    mbit * 1e6
}

pub fn bits_to_mbit(bits: f64) -> f64 {
    bits / 1e6
}

pub fn megabytes_to_bits(mb: f64) -> f64 {
    mb * 1e6 * BITS_PER_BYTE
}

pub fn bits_to_megabytes(bits: f64) -> f64 {
    bits / (1e6 * BITS_PER_BYTE)
}

pub fn gigabytes_to_bits(gb: f64) -> f64 {
    gb * 1e9 * BITS_PER_BYTE
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn conversions() {
        assert_relative_eq!(gbps_to_bps(10.0), 1e10);
        assert_relative_eq!(us_to_s(100.0), 1e-4);
        assert_relative_eq!(ms_to_s(15.0), 0.015);
        assert_relative_eq!(megabytes_to_bits(125.0), 1e9);
        assert_relative_eq!(bits_to_megabytes(1.25e8), 15.625);
        assert_relative_eq!(gigabytes_to_bits(1.0), 8e9);
        assert_relative_eq!(mbit_to_bits(1.0), 1e6);
    }

    #[test]
    fn table_values_convert_exactly() {
        assert_eq!(us_to_s(100.0), 1e-4);
        assert_eq!(us_to_s(10.0), 1e-5);
        assert_eq!(ms_to_s(15.0), 0.015);
        assert_eq!(gbps_to_bps(40.0), 4e10);
    }

    #[test]
    fn inverses() {
        for v in [0.0, 1.0, 37.5, 1e-3] {
            assert_relative_eq!(bps_to_gbps(gbps_to_bps(v)), v);
            assert_relative_eq!(s_to_us(us_to_s(v)), v);
            assert_relative_eq!(s_to_ms(ms_to_s(v)), v);
            assert_relative_eq!(bits_to_mbit(mbit_to_bits(v)), v);
        }
    }
}
