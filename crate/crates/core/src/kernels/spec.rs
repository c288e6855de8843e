use serde::{Deserialize, Serialize};

use super::{KernelError, LineDomain, Patch, Profile, RateKernel, Vertex};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyTag {
    Tree,
    LineZ,
    LineN,
}

/// JSON description of a kernel.
///
/// ```json
/// {"family": "tree", "d": 3, "loop_rate": 1.5,
///  "patch": [{"vertex": [], "row": [[[0], 1.0], [[1], 1.0], [[2], 1.0]]}]}
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub family: FamilyTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loop_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<Profile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub patch: Vec<PatchRowSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchRowSpec {
    pub vertex: Vertex,
    pub row: Vec<(Vertex, f64)>,
}

impl KernelSpec {
    pub fn from_json(text: &str) -> Result<Self, KernelError> {
        serde_json::from_str(text).map_err(|e| KernelError::Spec(e.to_string()))
    }

    pub fn build(&self) -> Result<RateKernel, KernelError> {
        let spec_err = |m: &str| KernelError::Spec(m.to_string());
        let base = match self.family {
            FamilyTag::Tree => {
                if self.profile.is_some() {
                    return Err(spec_err("tree kernels take no profile"));
                }
                let d = self.d.ok_or_else(|| spec_err("tree kernels need \"d\""))?;
                RateKernel::tree(d, self.loop_rate.unwrap_or(0.0))?
            }
            FamilyTag::LineZ | FamilyTag::LineN => {
                if self.d.is_some() || self.loop_rate.is_some() {
                    return Err(spec_err("line kernels take no \"d\" or \"loop_rate\""));
                }
                let profile = self
                    .profile
                    .clone()
                    .ok_or_else(|| spec_err("line kernels need \"profile\""))?;
                let domain = if self.family == FamilyTag::LineZ { LineDomain::Z } else { LineDomain::N };
                RateKernel::line(domain, profile)?
            }
        };
        if self.patch.is_empty() {
            return Ok(base);
        }
        let mut patch = Patch::new();
        for entry in &self.patch {
            if patch.support().any(|v| *v == entry.vertex) {
                return Err(KernelError::Spec(format!("vertex {} patched twice", entry.vertex)));
            }
            patch.insert(entry.vertex.clone(), entry.row.clone());
        }
        base.apply_patch(&patch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_with_patch() {
        let spec = KernelSpec::from_json(
            r#"{"family":"tree","d":3,"patch":[{"vertex":[],"row":[[[],6.0],[[0],1],[[1],1],[[2],1]]}]}"#,
        )
        .unwrap();
        let k = spec.build().unwrap();
        assert_eq!(k.rate(&Vertex::tree_root(), &Vertex::tree_root()), 6.0);
        assert_eq!(k.row_sum_bound(), 9.0);
    }

    #[test]
    fn line_spec() {
        let spec = KernelSpec::from_json(
            r#"{"family":"line_n","profile":{"kind":"increase_to","limit":1.0,"start":0.5,"rate":0.5}}"#,
        )
        .unwrap();
        let k = spec.build().unwrap();
        assert_eq!(k.rate(&Vertex::Line(0), &Vertex::Line(1)), 0.25);
    }

    #[test]
    fn malformed_specs_are_rejected() {
        for text in [
            r#"{"family":"tree"}"#,
            r#"{"family":"tree","d":2}"#,
            r#"{"family":"cube","d":3}"#,
            r#"{"family":"line_z"}"#,
            r#"{"family":"line_z","d":3,"profile":{"kind":"constant","value":1}}"#,
            r#"{"family":"tree","d":3,"patch":[{"vertex":5,"row":[]}]}"#,
            r#"{"family":"tree","d":3,"extra":1}"#,
            r#"{"family":"line_z","profile":{"kind":"constant","value":-1}}"#,
            "not json",
        ] {
            let result = KernelSpec::from_json(text).and_then(|s| s.build());
            assert!(result.is_err(), "{text}");
        }
    }

    #[test]
    fn round_trip() {
        let spec = KernelSpec {
            family: FamilyTag::LineZ,
            d: None,
            loop_rate: None,
            profile: Some(Profile::constant(1.0)),
            patch: vec![PatchRowSpec { vertex: Vertex::Line(0), row: vec![(Vertex::Line(0), 2.0)] }],
        };
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(KernelSpec::from_json(&text).unwrap(), spec);
    }
}
