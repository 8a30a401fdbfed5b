//! Field snapshots: one raw little-endian `f64` file per component
//! (row-major, `y` outer, `x` inner) plus a `key:value` sidecar.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::grid::{CellField, DomainGrid, EdgeField, NodeField};
use crate::scalar::{Real, C};
use crate::tdgl::State;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Site {
    Node,
    EdgeX,
    EdgeY,
    Cell,
}

impl Site {
    pub fn as_str(&self) -> &'static str {
        match self {
            Site::Node => "node",
            Site::EdgeX => "edge-x",
            Site::EdgeY => "edge-y",
            Site::Cell => "cell",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "node" => Site::Node,
            "edge-x" => Site::EdgeX,
            "edge-y" => Site::EdgeY,
            "cell" => Site::Cell,
            _ => return None,
        })
    }

    /// Array shape `(columns, rows)` of this site type on an `nx × ny` node grid.
    pub fn shape(&self, nx: usize, ny: usize) -> (usize, usize) {
        match self {
            Site::Node => (nx, ny),
            Site::EdgeX => (nx - 1, ny),
            Site::EdgeY => (nx, ny - 1),
            Site::Cell => (nx - 1, ny - 1),
        }
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotMeta {
    pub name: String,
    pub site: Site,
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub time: f64,
}

impl SnapshotMeta {
    fn render(&self) -> String {
        format!(
            "name:{}\nsite:{}\nNx:{}\nNy:{}\nh:{:e}\ntime:{:e}\n",
            self.name, self.site, self.nx, self.ny, self.h, self.time
        )
    }

    fn parse(text: &str) -> io::Result<Self> {
        let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
        let mut name = None;
        let mut site = None;
        let (mut nx, mut ny, mut h, mut time) = (None, None, None, None);
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line.split_once(':').ok_or_else(|| bad("metadata line without ':'"))?;
            let v = v.trim();
            match k.trim() {
                "name" => name = Some(v.to_string()),
                "site" => site = Some(Site::parse(v).ok_or_else(|| bad("unknown site type"))?),
                "Nx" => nx = v.parse().ok(),
                "Ny" => ny = v.parse().ok(),
                "h" => h = v.parse().ok(),
                "time" => time = v.parse().ok(),
                _ => {}
            }
        }
        Ok(Self {
            name: name.ok_or_else(|| bad("missing name"))?,
            site: site.ok_or_else(|| bad("missing site"))?,
            nx: nx.ok_or_else(|| bad("missing or bad Nx"))?,
            ny: ny.ok_or_else(|| bad("missing or bad Ny"))?,
            h: h.ok_or_else(|| bad("missing or bad h"))?,
            time: time.ok_or_else(|| bad("missing or bad time"))?,
        })
    }
}

/// Writes `<dir>/<name>.f64` and `<dir>/<name>.meta`; returns both paths.
pub fn write_component<T: Real>(dir: &Path, meta: &SnapshotMeta, data: &[T]) -> io::Result<[PathBuf; 2]> {
    let (c, r) = meta.site.shape(meta.nx, meta.ny);
    if c * r != data.len() {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "field length does not match its site shape"));
    }
    let mut bytes = Vec::with_capacity(8 * data.len());
    for x in data {
        bytes.extend_from_slice(&x.to_f64_().to_le_bytes());
    }
    let bin = dir.join(format!("{}.f64", meta.name));
    let side = dir.join(format!("{}.meta", meta.name));
    fs::write(&bin, bytes)?;
    fs::write(&side, meta.render())?;
    Ok([bin, side])
}

/// Reads a component written by [`write_component`].
pub fn read_component(dir: &Path, name: &str) -> io::Result<(SnapshotMeta, Vec<f64>)> {
    let meta = SnapshotMeta::parse(&fs::read_to_string(dir.join(format!("{name}.meta")))?)?;
    let bytes = fs::read(dir.join(format!("{name}.f64")))?;
    let (c, r) = meta.site.shape(meta.nx, meta.ny);
    if bytes.len() != 8 * c * r {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "snapshot size does not match metadata"));
    }
    let data = bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
    Ok((meta, data))
}

fn meta<T: Real>(grid: &DomainGrid<T>, name: String, site: Site, time: T) -> SnapshotMeta {
    SnapshotMeta {
        name,
        site,
        nx: grid.nx,
        ny: grid.ny,
        h: grid.h.to_f64_(),
        time: time.to_f64_(),
    }
}

pub fn write_node_field<T: Real>(dir: &Path, grid: &DomainGrid<T>, name: &str, f: &NodeField<T>, time: T) -> io::Result<Vec<PathBuf>> {
    Ok(write_component(dir, &meta(grid, name.into(), Site::Node, time), &f.data)?.to_vec())
}

pub fn write_cell_field<T: Real>(dir: &Path, grid: &DomainGrid<T>, name: &str, f: &CellField<T>, time: T) -> io::Result<Vec<PathBuf>> {
    Ok(write_component(dir, &meta(grid, name.into(), Site::Cell, time), &f.data)?.to_vec())
}

pub fn write_edge_field<T: Real>(dir: &Path, grid: &DomainGrid<T>, name: &str, f: &EdgeField<T>, time: T) -> io::Result<Vec<PathBuf>> {
    let mut out = write_component(dir, &meta(grid, format!("{name}_x"), Site::EdgeX, time), &f.x)?.to_vec();
    out.extend(write_component(dir, &meta(grid, format!("{name}_y"), Site::EdgeY, time), &f.y)?);
    Ok(out)
}

/// Writes `v` (as `<prefix>v_re`, `<prefix>v_im`) and `B` (as `<prefix>B_x`, `<prefix>B_y`).
pub fn write_state<T: Real>(dir: &Path, grid: &DomainGrid<T>, prefix: &str, state: &State<T>) -> io::Result<Vec<PathBuf>> {
    let re: Vec<T> = state.v.data.iter().map(|z| z.re).collect();
    let im: Vec<T> = state.v.data.iter().map(|z| z.im).collect();
    let mut out = write_component(dir, &meta(grid, format!("{prefix}v_re"), Site::Node, state.t), &re)?.to_vec();
    out.extend(write_component(dir, &meta(grid, format!("{prefix}v_im"), Site::Node, state.t), &im)?);
    out.extend(write_edge_field(dir, grid, &format!("{prefix}B"), &state.b, state.t)?);
    Ok(out)
}

pub fn read_state<T: Real>(dir: &Path, grid: &DomainGrid<T>, prefix: &str) -> io::Result<State<T>> {
    let get = |name: String, site: Site| -> io::Result<(SnapshotMeta, Vec<T>)> {
        let (m, d) = read_component(dir, &name)?;
        if m.site != site || m.nx != grid.nx || m.ny != grid.ny {
            return Err(io::Error::new(io::ErrorKind::InvalidData, format!("{name}: grid or site mismatch")));
        }
        Ok((m, d.into_iter().map(T::lit).collect()))
    };
    let (m, re) = get(format!("{prefix}v_re"), Site::Node)?;
    let (_, im) = get(format!("{prefix}v_im"), Site::Node)?;
    let (_, bx) = get(format!("{prefix}B_x"), Site::EdgeX)?;
    let (_, by) = get(format!("{prefix}B_y"), Site::EdgeY)?;
    Ok(State {
        v: NodeField {
            nx: grid.nx,
            ny: grid.ny,
            data: re.into_iter().zip(im).map(|(a, b)| C::new(a, b)).collect(),
        },
        b: EdgeField {
            nx: grid.nx,
            ny: grid.ny,
            x: bx,
            y: by,
        },
        t: T::lit(m.time),
        step: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tdgl::{ansatz, CoreProfile, VortexSpec};

    #[test]
    fn state_round_trip_is_bitwise() {
        let dir = std::env::temp_dir().join(format!("glv-snap-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let g = DomainGrid::<f64>::square(1.0, 17).unwrap();
        let v = ansatz(&g, &[VortexSpec { pos: [0.41, 0.53], degree: 1 }], 0.1, CoreProfile::Tanh);
        let b = EdgeField::from_fn(&g, |p| [(3.1 * p[1]).sin() / 7.0, p[0].exp() * 1e-3]);
        let st = State { v, b, t: 0.123456789, step: 0 };
        write_state(&dir, &g, "s_", &st).unwrap();
        let back = read_state(&dir, &g, "s_").unwrap();
        assert_eq!(back, st);
        let (m, _) = read_component(&dir, "s_B_y").unwrap();
        assert_eq!((m.site, m.nx, m.ny), (Site::EdgeY, 17, 17));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn rejects_wrong_length() {
        let m = SnapshotMeta { name: "x".into(), site: Site::Cell, nx: 3, ny: 3, h: 0.5, time: 0.0 };
        assert!(write_component(Path::new("."), &m, &[1.0f64; 9]).is_err());
    }
}
