//! Hardware profiles: the machine descriptor attached to every benchmark.
//!
//! Profiles load from a `key=value` text file, one field per line. Numeric
//! fields are stored as `f32` so CSV serialization with nine significant
//! digits round-trips them exactly.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Chip generation tag; `Host` covers CPU-only machines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Technology {
    Turing,
    Volta,
    Pascal,
    Maxwell,
    Kepler,
    Host,
}

impl Technology {
    pub const ALL: [Technology; 6] = [
        Technology::Turing,
        Technology::Volta,
        Technology::Pascal,
        Technology::Maxwell,
        Technology::Kepler,
        Technology::Host,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&t| t == self).unwrap()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Technology::Turing => "turing",
            Technology::Volta => "volta",
            Technology::Pascal => "pascal",
            Technology::Maxwell => "maxwell",
            Technology::Kepler => "kepler",
            Technology::Host => "host",
        }
    }
}

impl fmt::Display for Technology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Technology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Technology::ALL
            .into_iter()
            .find(|t| t.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::invalid(format!("unknown technology `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Connectivity {
    Pcie3x16,
    Pcie3x4,
    NvLink,
    Host,
}

impl Connectivity {
    pub const ALL: [Connectivity; 4] =
        [Connectivity::Pcie3x16, Connectivity::Pcie3x4, Connectivity::NvLink, Connectivity::Host];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&c| c == self).unwrap()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Connectivity::Pcie3x16 => "pcie3x16",
            Connectivity::Pcie3x4 => "pcie3x4",
            Connectivity::NvLink => "nvlink",
            Connectivity::Host => "host",
        }
    }
}

impl fmt::Display for Connectivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Connectivity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pcie3x16" | "pcie" => Ok(Connectivity::Pcie3x16),
            "pcie3x4" => Ok(Connectivity::Pcie3x4),
            "nvlink" => Ok(Connectivity::NvLink),
            "host" => Ok(Connectivity::Host),
            other => Err(Error::invalid(format!("unknown connectivity `{other}`"))),
        }
    }
}

/// Descriptor of the machine a benchmark ran on.
#[derive(Debug, Clone, PartialEq)]
pub struct HardwareProfile {
    pub name: String,
    pub technology: Technology,
    pub gpu_count: u32,
    pub memory_gb: f32,
    pub clock_mhz: f32,
    pub bandwidth_gbps: f32,
    pub core_count: u32,
    pub peak_gflops: f32,
    pub connectivity: Connectivity,
}

impl HardwareProfile {
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::invalid("hardware profile needs a name"));
        }
        if self.clock_mhz <= 0.0
            || self.bandwidth_gbps <= 0.0
            || self.memory_gb <= 0.0
            || self.core_count == 0
            || self.peak_gflops <= 0.0
            || self.gpu_count == 0
        {
            return Err(Error::invalid(
                "clock, bandwidth, memory, cores, peak GFLOPS and GPU count must be positive",
            ));
        }
        let finite =
            [self.memory_gb, self.clock_mhz, self.bandwidth_gbps, self.peak_gflops];
        if !finite.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("hardware profile contains non-finite values"));
        }
        Ok(())
    }

    /// Parse a `key=value` profile. Unknown keys are errors; `technology`
    /// defaults to `host`, `gpu_count` to 1, and `peak_gflops` to
    /// `2 * cores * clock` (one fused multiply-add per core per cycle).
    pub fn parse(text: &str) -> Result<Self> {
        let mut name = None;
        let mut technology = Technology::Host;
        let mut gpu_count = 1u32;
        let mut memory_gb = None;
        let mut clock_mhz = None;
        let mut bandwidth_gbps = None;
        let mut core_count = None;
        let mut peak_gflops = None;
        let mut connectivity = None;

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(line_no, format!("expected key=value, got `{line}`")))?;
            let key = key.trim();
            let value = value.trim();
            let num = |what: &str| -> Result<f32> {
                value.parse::<f32>().map_err(|_| {
                    Error::parse(line_no, format!("{what} must be a number, got `{value}`"))
                })
            };
            match key {
                "name" => name = Some(value.to_string()),
                "technology" => {
                    technology = value
                        .parse()
                        .map_err(|e: Error| Error::parse(line_no, e.to_string()))?
                }
                "gpu_count" => {
                    gpu_count = value.parse().map_err(|_| {
                        Error::parse(line_no, format!("gpu_count must be an integer, got `{value}`"))
                    })?
                }
                "memory_gb" => memory_gb = Some(num("memory_gb")?),
                "clock_mhz" => clock_mhz = Some(num("clock_mhz")?),
                "bandwidth_gbps" => bandwidth_gbps = Some(num("bandwidth_gbps")?),
                "cores" => {
                    core_count = Some(value.parse::<u32>().map_err(|_| {
                        Error::parse(line_no, format!("cores must be an integer, got `{value}`"))
                    })?)
                }
                "peak_gflops" => peak_gflops = Some(num("peak_gflops")?),
                "connectivity" => {
                    connectivity = Some(
                        value
                            .parse()
                            .map_err(|e: Error| Error::parse(line_no, e.to_string()))?,
                    )
                }
                other => {
                    return Err(Error::parse(line_no, format!("unknown profile key `{other}`")))
                }
            }
        }

        let missing = |what: &str| Error::invalid(format!("profile is missing `{what}`"));
        let core_count = core_count.ok_or_else(|| missing("cores"))?;
        let clock_mhz = clock_mhz.ok_or_else(|| missing("clock_mhz"))?;
        let profile = HardwareProfile {
            name: name.ok_or_else(|| missing("name"))?,
            technology,
            gpu_count,
            memory_gb: memory_gb.ok_or_else(|| missing("memory_gb"))?,
            clock_mhz,
            bandwidth_gbps: bandwidth_gbps.ok_or_else(|| missing("bandwidth_gbps"))?,
            core_count,
            peak_gflops: peak_gflops
                .unwrap_or(2.0 * core_count as f32 * clock_mhz / 1000.0),
            connectivity: connectivity.ok_or_else(|| missing("connectivity"))?,
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_v100_style_profile() {
        let p = HardwareProfile::parse(
            "name=V100\ntechnology=volta\ncores=5120\nclock_mhz=1455\nmemory_gb=16\n\
             bandwidth_gbps=900\nconnectivity=NVLink\n",
        )
        .unwrap();
        assert_eq!(p.name, "V100");
        assert_eq!(p.technology, Technology::Volta);
        assert_eq!(p.core_count, 5120);
        assert_eq!(p.connectivity, Connectivity::NvLink);
        // Derived peak: 2 * 5120 * 1.455 GHz.
        assert!((p.peak_gflops - 14899.2).abs() < 0.5);
    }

    #[test]
    fn unknown_key_reports_its_line() {
        let err = HardwareProfile::parse("name=x\nnonsense=1\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn missing_required_field_is_rejected() {
        assert!(HardwareProfile::parse("name=x\ncores=4\nclock_mhz=2100\n").is_err());
    }
}
