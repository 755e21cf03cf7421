//! JSON formats for Hamiltonians and measures.
//!
//! Floats are written with 17 significant digits in exponent form, so
//! `load ∘ save` is the identity on values and `save ∘ load` on text.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Atom, Hamiltonian, Segment, SpectralMeasure, SymMat2};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct SegmentJson {
    r0: f64,
    r1: f64,
    h: [[f64; 2]; 2],
}

#[derive(Serialize, Deserialize)]
struct HamiltonianJson {
    ell: f64,
    segments: Vec<SegmentJson>,
}

#[derive(Serialize, Deserialize)]
struct MeasureJson {
    window: f64,
    #[serde(default)]
    b: f64,
    #[serde(default)]
    c: f64,
    atoms: Vec<Atom>,
}

/// Compact JSON with `{:.16e}` floats.
#[derive(Clone, Copy, Default)]
pub struct CanonicalFormatter;

impl serde_json::ser::Formatter for CanonicalFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Serializes any value with [`CanonicalFormatter`].
pub fn to_canonical_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, CanonicalFormatter);
    value.serialize(&mut ser)?;
    String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
}

pub fn hamiltonian_to_json(h: &Hamiltonian) -> Result<String> {
    let doc = HamiltonianJson {
        ell: h.ell(),
        segments: h
            .segments()
            .iter()
            .map(|s| SegmentJson { r0: s.r0, r1: s.r1, h: s.h.to_array() })
            .collect(),
    };
    to_canonical_string(&doc)
}

pub fn hamiltonian_from_json(text: &str) -> Result<Hamiltonian> {
    let doc: HamiltonianJson = serde_json::from_str(text)?;
    let mut segments = Vec::with_capacity(doc.segments.len());
    for (i, s) in doc.segments.into_iter().enumerate() {
        if s.h[0][1] != s.h[1][0] {
            return Err(Error::Invalid(format!("segment {i} matrix is not symmetric")));
        }
        segments.push(Segment { r0: s.r0, r1: s.r1, h: SymMat2::new(s.h[0][0], s.h[0][1], s.h[1][1]) });
    }
    Hamiltonian::new(doc.ell, segments)
}

pub fn measure_to_json(mu: &SpectralMeasure) -> Result<String> {
    let doc = MeasureJson {
        window: mu.window,
        b: mu.herglotz_b,
        c: mu.herglotz_c,
        atoms: mu.atoms().to_vec(),
    };
    to_canonical_string(&doc)
}

pub fn measure_from_json(text: &str) -> Result<SpectralMeasure> {
    let doc: MeasureJson = serde_json::from_str(text)?;
    SpectralMeasure::new(doc.atoms, doc.window, doc.b, doc.c)
}

pub fn load_hamiltonian(path: &Path) -> Result<Hamiltonian> {
    hamiltonian_from_json(&std::fs::read_to_string(path)?)
}

pub fn load_measure(path: &Path) -> Result<SpectralMeasure> {
    measure_from_json(&std::fs::read_to_string(path)?)
}

pub fn save_hamiltonian(h: &Hamiltonian, path: &Path) -> Result<()> {
    std::fs::write(path, hamiltonian_to_json(h)?)?;
    Ok(())
}

pub fn save_measure(mu: &SpectralMeasure, path: &Path) -> Result<()> {
    std::fs::write(path, measure_to_json(mu)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pieces() -> impl Strategy<Value = Vec<(f64, SymMat2)>> {
        prop::collection::vec(
            (1e-3f64..10.0, 1e-3f64..10.0, 1e-3f64..10.0, -1.0f64..1.0),
            1..8,
        )
        .prop_map(|v| {
            v.into_iter()
                .map(|(len, a, d, rho)| (len, SymMat2::new(a, rho * (a * d).sqrt(), d)))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn hamiltonian_roundtrip(p in pieces()) {
            let h = Hamiltonian::from_pieces(&p).unwrap();
            let text = hamiltonian_to_json(&h).unwrap();
            let back = hamiltonian_from_json(&text).unwrap();
            prop_assert_eq!(&back, &h);
            prop_assert_eq!(hamiltonian_to_json(&back).unwrap(), text);
        }

        #[test]
        fn measure_roundtrip(ts in prop::collection::vec(0.01f64..50.0, 0..20), m in 0.1f64..3.0) {
            let mut atoms: Vec<Atom> = ts.iter().map(|&t| Atom { t, mass: m * (1.0 + t) }).collect();
            atoms.push(Atom { t: 0.0, mass: m });
            let mu = SpectralMeasure::new(atoms, 60.0, 0.25, -0.5).unwrap();
            let text = measure_to_json(&mu).unwrap();
            let back = measure_from_json(&text).unwrap();
            prop_assert_eq!(&back, &mu);
            prop_assert_eq!(measure_to_json(&back).unwrap(), text);
        }
    }

    #[test]
    fn asymmetric_matrix_rejected() {
        let text = r#"{"ell":1,"segments":[{"r0":0,"r1":1,"h":[[1,0.5],[0.4,1]]}]}"#;
        assert!(matches!(hamiltonian_from_json(text), Err(Error::Invalid(_))));
    }

    #[test]
    fn malformed_json_is_parse_error() {
        assert!(matches!(hamiltonian_from_json("{"), Err(Error::Parse(_))));
    }

    #[test]
    fn float_format() {
        assert_eq!(to_canonical_string(&0.1f64).unwrap(), "1.0000000000000001e-1");
    }
}
