//! Plain-text `key = value` files with `[section]` headers.
//!
//! Keys may repeat (e.g. one `scatterer = ...` line per scatterer); `#` starts
//! a comment. Keys before the first header belong to the root section `""`.
//! Command-line overrides use `section.key=value`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sim::{
    ArrayGeometry, DisturbanceModel, GridSpec, OfdmConfig, Pedestrian, Preset, Rect,
    Scatterer, Vec3,
};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct KvFile {
    entries: Vec<(String, String, String)>,
}

impl KvFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = KvFile::default();
        let mut section = String::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| {
                    Error::Config(format!("line {}: unterminated section header", no + 1))
                })?;
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value, got '{line}'", no + 1))
            })?;
            let k = k.trim();
            if k.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", no + 1)));
            }
            out.push(&section, k, v.trim());
        }
        Ok(out)
    }

    pub fn push(&mut self, section: &str, key: &str, value: &str) {
        self.entries
            .push((section.to_string(), key.to_string(), value.to_string()));
    }

    /// Replaces every value of `section.key` with `value`.
    pub fn set(&mut self, section: &str, key: &str, value: &str) {
        match self
            .entries
            .iter()
            .position(|(s, k, _)| s == section && k == key)
        {
            Some(first) => {
                self.entries[first].2 = value.to_string();
                let mut i = 0;
                self.entries.retain(|(s, k, _)| {
                    i += 1;
                    !(s == section && k == key) || i - 1 == first
                });
            }
            None => self.push(section, key, value),
        }
    }

    /// Applies a `section.key=value` override (root keys: `key=value`).
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (path, value) = spec
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{spec}' is not key=value")))?;
        let (section, key) = path.rsplit_once('.').unwrap_or(("", path));
        if key.trim().is_empty() {
            return Err(Error::Config(format!("override '{spec}' has an empty key")));
        }
        self.set(section.trim(), key.trim(), value.trim());
        Ok(())
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(s, k, _)| s == section && k == key)
            .map(|(_, _, v)| v.as_str())
    }

    pub fn get_all(&self, section: &str, key: &str) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|(s, k, _)| s == section && k == key)
            .map(|(_, _, v)| v.as_str())
            .collect()
    }

    pub fn section<'a>(&'a self, section: &'a str) -> impl Iterator<Item = (&'a str, &'a str)> + 'a {
        self.entries
            .iter()
            .filter(move |(s, _, _)| s == section)
            .map(|(_, k, v)| (k.as_str(), v.as_str()))
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.entries.iter().any(|(s, _, _)| s == section)
    }

    pub fn parse_value<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| {
                Error::Config(format!("cannot parse {section}.{key} = '{v}'"))
            }),
        }
    }

    pub fn value_or<T: FromStr>(&self, section: &str, key: &str, default: T) -> Result<T> {
        Ok(self.parse_value(section, key)?.unwrap_or(default))
    }

    /// Comma-separated list value.
    pub fn parse_list<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<Vec<T>>> {
        self.get(section, key).map(|v| parse_csv_list(v, section, key)).transpose()
    }
}

pub fn parse_csv_list<T: FromStr>(v: &str, section: &str, key: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| Error::Config(format!("cannot parse item '{s}' of {section}.{key}")))
        })
        .collect()
}

impl fmt::Display for KvFile {
    /// Canonical form: root keys first, then sections in order of first
    /// appearance, keys in insertion order.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut sections: Vec<&str> = Vec::new();
        for (s, _, _) in &self.entries {
            if !sections.contains(&s.as_str()) {
                sections.push(s);
            }
        }
        sections.sort_by_key(|s| !s.is_empty());
        let mut first = true;
        for s in sections {
            if !s.is_empty() {
                if !first {
                    writeln!(f)?;
                }
                writeln!(f, "[{s}]")?;
            }
            first = false;
            for (k, v) in self.section(s) {
                writeln!(f, "{k} = {v}")?;
            }
        }
        Ok(())
    }
}

fn floats(v: &str, n: usize, what: &str) -> Result<Vec<f64>> {
    let xs: Vec<f64> = parse_csv_list(v, "environment", what)?;
    if xs.len() != n {
        return Err(Error::Config(format!(
            "{what} expects {n} comma-separated numbers, got '{v}'"
        )));
    }
    Ok(xs)
}

/// Builds a preset from an environment file.
///
/// ```text
/// [preset]       base = desk-los   seed = 7   name = ...   snr_db = 20
/// [array]        rows, cols, spacing
/// [ofdm]         subcarriers, bandwidth, carrier, guard_fraction, cp_fraction
/// [area]         x_min, y_min, x_max, y_max      (UE area covered by the grid)
/// [grid]         nx, ny                          (cells along x / y)
/// [environment]  los = true|false, ue_height,
///                scatterer = x, y, z, gain_re, gain_im      (repeatable; replaces
///                                                            the random layout)
///                pedestrian = ax, ay, bx, by, attenuation_db (repeatable)
/// [disturbance]  pedestrians, width, attenuation_db
/// [drift]        day, seed, phase_std, gain_std_db, timing_std
/// ```
///
/// Every key is optional; missing ones keep the base preset's value.
pub fn preset_from_kv(kv: &KvFile) -> Result<Preset> {
    let seed = kv.value_or("preset", "seed", 1u64)?;
    let base = kv.get("preset", "base").unwrap_or("desk-los");
    let mut p = Preset::by_name(base, seed)?;
    if let Some(name) = kv.get("preset", "name") {
        p.name = name.to_string();
    }
    p.snr_db = kv.value_or("preset", "snr_db", p.snr_db)?;

    let rows = kv.value_or("array", "rows", p.array.rows)?;
    let cols = kv.value_or("array", "cols", p.array.cols)?;
    let carrier = kv.value_or("ofdm", "carrier", p.ofdm.carrier_freq)?;
    let spacing = kv.value_or("array", "spacing", crate::sim::SPEED_OF_LIGHT / carrier / 2.0)?;
    p.array = ArrayGeometry::new(rows, cols, spacing, p.array.origin)?;
    p.ofdm = OfdmConfig {
        n_subcarriers: kv.value_or("ofdm", "subcarriers", p.ofdm.n_subcarriers)?,
        bandwidth: kv.value_or("ofdm", "bandwidth", p.ofdm.bandwidth)?,
        carrier_freq: carrier,
        guard_fraction: kv.value_or("ofdm", "guard_fraction", p.ofdm.guard_fraction)?,
        cp_fraction: kv.value_or("ofdm", "cp_fraction", p.ofdm.cp_fraction)?,
    };

    let cover = p.grid.coverage();
    let area = Rect::new(
        kv.value_or("area", "x_min", cover.x_min)?,
        kv.value_or("area", "y_min", cover.y_min)?,
        kv.value_or("area", "x_max", cover.x_max)?,
        kv.value_or("area", "y_max", cover.y_max)?,
    );
    let nx0 = (cover.width() / p.grid.dx).round() as usize;
    let ny0 = (cover.height() / p.grid.dy).round() as usize;
    let nx = kv.value_or("grid", "nx", nx0)?;
    let ny = kv.value_or("grid", "ny", ny0)?;
    if nx == 0 || ny == 0 {
        return Err(Error::Config("grid needs nx, ny >= 1".into()));
    }
    if area != cover || nx != nx0 || ny != ny0 {
        p.grid = GridSpec::cell_centers(area, nx, ny);
        p.environment.area = area;
        if kv.get_all("environment", "scatterer").is_empty() {
            let los = p.environment.los_enabled;
            let base_scene = Preset::scene(&p.name, los, area, nx, ny, rows, cols, p.ofdm.n_subcarriers, seed)?;
            p.environment.scatterers = base_scene.environment.scatterers;
        }
    }

    p.environment.los_enabled = kv.value_or("environment", "los", p.environment.los_enabled)?;
    p.ue_height = kv.value_or("environment", "ue_height", p.ue_height)?;
    let scat = kv.get_all("environment", "scatterer");
    if !scat.is_empty() {
        p.environment.scatterers = scat
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let x = floats(v, 5, "scatterer")?;
                Ok(Scatterer {
                    id: i as u32,
                    position: Vec3::new(x[0], x[1], x[2]),
                    reflection_gain: Complex64::new(x[3], x[4]),
                })
            })
            .collect::<Result<_>>()?;
    }
    for v in kv.get_all("environment", "pedestrian") {
        let x = floats(v, 5, "pedestrian")?;
        p.environment.pedestrians.push(Pedestrian {
            a: [x[0], x[1]],
            b: [x[2], x[3]],
            attenuation_db: x[4],
        });
    }

    if kv.has_section("disturbance") {
        let d = p.disturbance.unwrap_or_default();
        let model = DisturbanceModel {
            pedestrians: kv.value_or("disturbance", "pedestrians", d.pedestrians)?,
            width: kv.value_or("disturbance", "width", d.width)?,
            attenuation_db: kv.value_or("disturbance", "attenuation_db", d.attenuation_db)?,
        };
        p.disturbance = (model.pedestrians > 0).then_some(model);
    }

    p.day = kv.value_or("drift", "day", p.day)?;
    p.drift_seed = kv.value_or("drift", "seed", p.drift_seed)?;
    p.drift.phase_std = kv.value_or("drift", "phase_std", p.drift.phase_std)?;
    p.drift.gain_std_db = kv.value_or("drift", "gain_std_db", p.drift.gain_std_db)?;
    p.drift.timing_std = kv.value_or("drift", "timing_std", p.drift.timing_std)?;

    p.validate().map_err(|e| Error::Config(e.to_string()))?;
    Ok(p)
}

/// Loads an environment preset file.
pub fn load_preset(path: &std::path::Path) -> Result<Preset> {
    let text = std::fs::read_to_string(path)
        .map_err(|_| Error::MissingFile(path.display().to_string()))?;
    preset_from_kv(&KvFile::parse(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_sections_and_repeats() {
        let kv = KvFile::parse(
            "top = 1\n[a]\nx = 2 # comment\nx = 3\n\n[b]\ny=hello world\n",
        )
        .unwrap();
        assert_eq!(kv.get("", "top"), Some("1"));
        assert_eq!(kv.get("a", "x"), Some("3"));
        assert_eq!(kv.get_all("a", "x"), vec!["2", "3"]);
        assert_eq!(kv.get("b", "y"), Some("hello world"));
        assert!(KvFile::parse("[oops\n").is_err());
        assert!(KvFile::parse("novalue\n").is_err());
    }

    #[test]
    fn overrides_replace() {
        let mut kv = KvFile::parse("[a]\nx = 2\nx = 3\n").unwrap();
        kv.apply_override("a.x=9").unwrap();
        assert_eq!(kv.get_all("a", "x"), vec!["9"]);
        kv.apply_override("b.c.d=1").unwrap();
        assert_eq!(kv.get("b.c", "d"), Some("1"));
        assert!(kv.apply_override("nothing").is_err());
    }

    #[test]
    fn display_roundtrip() {
        let kv = KvFile::parse("r = 0\n[s]\nk = v\nk = w\n[t]\nz = 1\n").unwrap();
        assert_eq!(KvFile::parse(&kv.to_string()).unwrap(), kv);
    }

    #[test]
    fn preset_file() {
        let kv = KvFile::parse(
            "[preset]\nbase = desk-los\nseed = 3\n[array]\nrows = 2\ncols = 2\n[ofdm]\nsubcarriers = 32\n\
             [area]\nx_min = 1\ny_min = 0\nx_max = 2\ny_max = 1\n[grid]\nnx = 4\nny = 4\n\
             [environment]\nlos = false\nscatterer = 2, 3, 0, 0.5, 0\nscatterer = 0, 3, 1, 0, 0.5\n",
        )
        .unwrap();
        let p = preset_from_kv(&kv).unwrap();
        assert_eq!(p.array.n_antennas(), 4);
        assert_eq!(p.ofdm.n_subcarriers, 32);
        assert_eq!(p.grid_points().unwrap().len(), 16);
        assert_eq!(p.environment.scatterers.len(), 2);
        assert!(!p.environment.los_enabled);
    }
}
