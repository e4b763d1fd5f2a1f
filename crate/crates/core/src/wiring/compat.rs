//! Directional structural compatibility between a provided and a used type.

use std::fmt;

use crate::model::DataType;

/// Why a provided type cannot feed a used type. `path` walks from the root
/// through field names and `[]` (array element).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub path: Vec<String>,
    pub reason: String,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            f.write_str(&self.reason)
        } else {
            write!(f, "at {}: {}", self.path.join("."), self.reason)
        }
    }
}

impl std::error::Error for Mismatch {}

/// Can a port producing `provided` feed a port expecting `used`?
///
/// Scalars must match exactly. Arrays need compatible elements, equal rank
/// and every extent the consumer pins down. Composites use width
/// subtyping: each used field must exist in the provided type with a
/// compatible type, extra provided fields are fine. Opaques need the same
/// name and major version and a provided minor at least the used one.
pub fn ports_compatible(provided: &DataType, used: &DataType) -> Result<(), Mismatch> {
    let mut path = Vec::new();
    check(provided, used, &mut path).map_err(|reason| Mismatch { path, reason })
}

fn check(provided: &DataType, used: &DataType, path: &mut Vec<String>) -> Result<(), String> {
    use DataType::*;
    match (provided, used) {
        (Integer64, Integer64) | (Real64, Real64) | (Boolean, Boolean) | (Text, Text) => Ok(()),
        (
            Array {
                element: pe,
                rank: pr,
                extents: px,
            },
            Array {
                element: ue,
                rank: ur,
                extents: ux,
            },
        ) => {
            if pr != ur {
                return Err(format!("rank: provided {pr}, used {ur}"));
            }
            if let Some(ux) = ux {
                for (dim, want) in ux.iter().enumerate() {
                    let Some(want) = want else { continue };
                    let have = px.as_ref().and_then(|px| px.get(dim).copied().flatten());
                    if have != Some(*want) {
                        let have = have.map_or("unspecified".to_string(), |h| h.to_string());
                        return Err(format!("extent: dimension {dim} provided {have}, used {want}"));
                    }
                }
            }
            path.push("[]".to_string());
            check(pe, ue, path)?;
            path.pop();
            Ok(())
        }
        (Composite { fields: pf }, Composite { fields: uf }) => {
            for (name, ut) in uf {
                let pt = pf.get(name).ok_or_else(|| format!("missing field {name}"))?;
                path.push(name.clone());
                check(pt, ut, path)?;
                path.pop();
            }
            Ok(())
        }
        (Opaque { name: pn, version: pv }, Opaque { name: un, version: uv }) => {
            if pn != un {
                Err(format!("opaque name: provided {pn}, used {un}"))
            } else if pv.major != uv.major {
                Err(format!("opaque major version: provided {pv}, used {uv}"))
            } else if pv.minor < uv.minor {
                Err(format!("opaque minor version: provided {pv}, used {uv}"))
            } else {
                Ok(())
            }
        }
        (p, u) => Err(format!("kind: provided {}, used {}", p.kind_name(), u.kind_name())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Version;

    fn opaque(minor: u64, major: u64) -> DataType {
        DataType::Opaque {
            name: "org.sci.grid".parse().unwrap(),
            version: Version::new(major, minor, 0),
        }
    }

    #[test]
    fn identical_scalars() {
        assert!(ports_compatible(&DataType::Real64, &DataType::Real64).is_ok());
        let err = ports_compatible(&DataType::Integer64, &DataType::Real64).unwrap_err();
        assert!(err.reason.starts_with("kind"));
    }

    #[test]
    fn rank_rule() {
        let err = ports_compatible(
            &DataType::array(DataType::Real64, 2),
            &DataType::array(DataType::Real64, 1),
        )
        .unwrap_err();
        assert!(err.reason.starts_with("rank"), "{err}");
    }

    #[test]
    fn width_rule_is_directional() {
        let wide = DataType::composite([("x", DataType::Real64), ("y", DataType::Real64)]);
        let narrow = DataType::composite([("x", DataType::Real64)]);
        assert!(ports_compatible(&wide, &narrow).is_ok());
        let err = ports_compatible(&narrow, &wide).unwrap_err();
        assert_eq!(err.reason, "missing field y");
    }

    #[test]
    fn extents() {
        let fixed = DataType::array_with_extents(DataType::Real64, vec![Some(3)]);
        let open = DataType::array(DataType::Real64, 1);
        assert!(ports_compatible(&fixed, &open).is_ok());
        assert!(ports_compatible(&open, &fixed)
            .unwrap_err()
            .reason
            .starts_with("extent"));
        let other = DataType::array_with_extents(DataType::Real64, vec![Some(4)]);
        assert!(ports_compatible(&other, &fixed).is_err());
    }

    #[test]
    fn opaque_versions() {
        assert!(ports_compatible(&opaque(3, 1), &opaque(2, 1)).is_ok());
        assert!(ports_compatible(&opaque(1, 1), &opaque(2, 1)).is_err());
        assert!(ports_compatible(&opaque(2, 2), &opaque(2, 1)).is_err());
    }

    #[test]
    fn mismatch_path_points_inside() {
        let p = DataType::composite([("grid", DataType::array(DataType::Integer64, 1))]);
        let u = DataType::composite([("grid", DataType::array(DataType::Real64, 1))]);
        let err = ports_compatible(&p, &u).unwrap_err();
        assert_eq!(err.path, ["grid", "[]"]);
    }
}
