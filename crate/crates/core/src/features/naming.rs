//! Canonical MRI feature names over the Desikan-Killiany cortical atlas.
//!
//! Cortical features are `{lh|rh}_{region}_{volume|thickness|area}` for the
//! 34 regions per hemisphere below (FreeSurfer `aparc` spelling), giving
//! 204 columns. Hippocampal volumes are added per hemisphere, plus the
//! derived `total_hippocampus_volume` (left + right).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub const DK_REGIONS: [&str; 34] = [
    "bankssts",
    "caudalanteriorcingulate",
    "caudalmiddlefrontal",
    "cuneus",
    "entorhinal",
    "fusiform",
    "inferiorparietal",
    "inferiortemporal",
    "isthmuscingulate",
    "lateraloccipital",
    "lateralorbitofrontal",
    "lingual",
    "medialorbitofrontal",
    "middletemporal",
    "parahippocampal",
    "paracentral",
    "parsopercularis",
    "parsorbitalis",
    "parstriangularis",
    "pericalcarine",
    "postcentral",
    "posteriorcingulate",
    "precentral",
    "precuneus",
    "rostralanteriorcingulate",
    "rostralmiddlefrontal",
    "superiorfrontal",
    "superiorparietal",
    "superiortemporal",
    "supramarginal",
    "frontalpole",
    "temporalpole",
    "transversetemporal",
    "insula",
];

pub const HIPPOCAMPUS: &str = "hippocampus";
pub const LH_HIPPOCAMPUS_VOLUME: &str = "lh_hippocampus_volume";
pub const RH_HIPPOCAMPUS_VOLUME: &str = "rh_hippocampus_volume";
pub const TOTAL_HIPPOCAMPUS_VOLUME: &str = "total_hippocampus_volume";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hemisphere {
    Lh,
    Rh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Volume,
    Thickness,
    Area,
}

impl Hemisphere {
    pub const BOTH: [Hemisphere; 2] = [Hemisphere::Lh, Hemisphere::Rh];
    pub fn as_str(self) -> &'static str {
        match self {
            Hemisphere::Lh => "lh",
            Hemisphere::Rh => "rh",
        }
    }
}

impl Measure {
    pub const ALL: [Measure; 3] = [Measure::Volume, Measure::Thickness, Measure::Area];
    pub fn as_str(self) -> &'static str {
        match self {
            Measure::Volume => "volume",
            Measure::Thickness => "thickness",
            Measure::Area => "area",
        }
    }
}

impl fmt::Display for Hemisphere {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A parsed per-hemisphere regional feature name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RegionFeature {
    pub hemisphere: Hemisphere,
    pub region: &'static str,
    pub measure: Measure,
}

impl fmt::Display for RegionFeature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}_{}", self.hemisphere, self.region, self.measure)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownFeature(pub String);

impl fmt::Display for UnknownFeature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown feature name `{}`", self.0)
    }
}

impl FromStr for RegionFeature {
    type Err = UnknownFeature;

    /// Accepts cortical names and the per-hemisphere hippocampal volumes.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || UnknownFeature(s.to_string());
        let (hemi, rest) = s.split_once('_').ok_or_else(err)?;
        let hemisphere = match hemi {
            "lh" => Hemisphere::Lh,
            "rh" => Hemisphere::Rh,
            _ => return Err(err()),
        };
        let (region, measure) = rest.rsplit_once('_').ok_or_else(err)?;
        let measure = match measure {
            "volume" => Measure::Volume,
            "thickness" => Measure::Thickness,
            "area" => Measure::Area,
            _ => return Err(err()),
        };
        if region == HIPPOCAMPUS {
            return if measure == Measure::Volume {
                Ok(RegionFeature { hemisphere, region: HIPPOCAMPUS, measure })
            } else {
                Err(err())
            };
        }
        let region = DK_REGIONS.iter().find(|&&r| r == region).ok_or_else(err)?;
        Ok(RegionFeature { hemisphere, region, measure })
    }
}

/// The fixed naming scheme: ordered cortical names plus hippocampal names.
#[derive(Debug, Clone)]
pub struct FeatureNamingScheme {
    cortical: Vec<String>,
    hippocampal: Vec<String>,
}

impl Default for FeatureNamingScheme {
    fn default() -> Self {
        let mut cortical = Vec::with_capacity(204);
        for h in Hemisphere::BOTH {
            for r in DK_REGIONS {
                for m in Measure::ALL {
                    cortical.push(format!("{h}_{r}_{m}"));
                }
            }
        }
        let hippocampal = vec![
            LH_HIPPOCAMPUS_VOLUME.to_string(),
            RH_HIPPOCAMPUS_VOLUME.to_string(),
            TOTAL_HIPPOCAMPUS_VOLUME.to_string(),
        ];
        Self { cortical, hippocampal }
    }
}

impl FeatureNamingScheme {
    /// The 204 cortical names in canonical order.
    pub fn cortical(&self) -> &[String] {
        &self.cortical
    }

    pub fn hippocampal(&self) -> &[String] {
        &self.hippocampal
    }

    /// Every MRI column: cortical then hippocampal.
    pub fn all_mri(&self) -> impl Iterator<Item = &String> {
        self.cortical.iter().chain(self.hippocampal.iter())
    }

    /// Regional columns: cortical plus per-hemisphere hippocampus (no derived total).
    pub fn regional(&self) -> impl Iterator<Item = &String> {
        self.cortical.iter().chain(self.hippocampal.iter().take(2))
    }

    pub fn is_mri(&self, name: &str) -> bool {
        self.hippocampal.iter().any(|h| h == name) || RegionFeature::from_str(name).is_ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn scheme_has_204_unique_cortical_names() {
        let s = FeatureNamingScheme::default();
        assert_eq!(s.cortical().len(), 204);
        assert_eq!(s.cortical().iter().collect::<HashSet<_>>().len(), 204);
        assert_eq!(s.all_mri().count(), 207);
        assert_eq!(s.regional().count(), 206);
    }

    #[test]
    fn names_parse_back() {
        let s = FeatureNamingScheme::default();
        for n in s.regional() {
            let f: RegionFeature = n.parse().unwrap();
            assert_eq!(&f.to_string(), n);
        }
        assert!(s.is_mri(TOTAL_HIPPOCAMPUS_VOLUME));
    }

    #[test]
    fn typos_are_rejected() {
        for bad in ["lh_hipocampus_volume", "xh_precuneus_volume", "lh_precuneus_depth", "lh_hippocampus_thickness", "precuneus"] {
            assert!(bad.parse::<RegionFeature>().is_err(), "{bad}");
        }
    }
}
