//! Occupied-cell point clouds.

use std::io::Write;
use std::str::FromStr;

use handforge_core::opposability::{LayerKey, WorkspaceGrid};
use handforge_core::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum CloudFormat {
    /// Binary little-endian PLY with double coordinates.
    #[default]
    Ply,
    /// `x,y,z` rows in millimetres with a header line.
    Csv,
}

impl CloudFormat {
    pub fn extension(self) -> &'static str {
        match self {
            CloudFormat::Ply => "ply",
            CloudFormat::Csv => "csv",
        }
    }
}

impl FromStr for CloudFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "ply" => Ok(CloudFormat::Ply),
            "csv" => Ok(CloudFormat::Csv),
            _ => Err(Error::InvalidInput(format!("unknown cloud format `{s}`"))),
        }
    }
}

/// Writes the centers of the occupied cells of one layer.
pub fn export_cloud<W: Write>(
    grid: &WorkspaceGrid,
    key: LayerKey,
    format: CloudFormat,
    out: W,
) -> Result<usize, crate::CliError> {
    let layer = grid.layer(key).ok_or_else(|| {
        Error::InvalidInput(format!("no sampled layer for {} {}", key.chain, key.site))
    })?;
    let points: Vec<[f64; 3]> = layer
        .occupied()
        .map(|i| {
            let c = grid.cell_center(i);
            [c.x, c.y, c.z]
        })
        .collect();
    match format {
        CloudFormat::Ply => write_ply(&points, out)?,
        CloudFormat::Csv => write_csv(&points, out)?,
    }
    Ok(points.len())
}

pub fn write_ply<W: Write>(points: &[[f64; 3]], mut out: W) -> std::io::Result<()> {
    write!(
        out,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nend_header\n",
        points.len()
    )?;
    for p in points {
        for v in p {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()
}

pub fn write_csv<W: Write>(points: &[[f64; 3]], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "y", "z"])?;
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use handforge_core::hand::Finger;
    use handforge_core::SiteName;
    use nalgebra::Vector3;

    fn grid() -> WorkspaceGrid {
        WorkspaceGrid::new(Vector3::zeros(), Vector3::repeat(20.0), 2.0).unwrap()
    }

    #[test]
    fn empty_layer_is_a_valid_file() {
        let mut g = grid();
        g.ensure_layer(LayerKey::thumb_pulp());
        let mut buf = Vec::new();
        assert_eq!(
            export_cloud(&g, LayerKey::thumb_pulp(), CloudFormat::Ply, &mut buf).unwrap(),
            0
        );
        assert!(buf.ends_with(b"end_header\n"));
        assert!(String::from_utf8_lossy(&buf).contains("element vertex 0\n"));
    }

    #[test]
    fn single_cell_is_its_center() {
        let mut g = WorkspaceGrid::new(Vector3::repeat(1.0), Vector3::repeat(21.0), 2.0).unwrap();
        let key = LayerKey::new(Finger::Ring, SiteName::Tip);
        g.mark_cell(key, &Vector3::new(10.0, 10.0, 10.0)).unwrap();
        let mut buf = Vec::new();
        export_cloud(&g, key, CloudFormat::Csv, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x,y,z\n10.0,10.0,10.0\n");

        let mut buf = Vec::new();
        assert_eq!(
            export_cloud(&g, key, CloudFormat::Ply, &mut buf).unwrap(),
            1
        );
        let body = &buf[buf.len() - 24..];
        for k in 0..3 {
            let v = f64::from_le_bytes(body[8 * k..8 * k + 8].try_into().unwrap());
            assert_eq!(v, 10.0);
        }
    }

    #[test]
    fn missing_layer_is_invalid() {
        let g = grid();
        let r = export_cloud(
            &g,
            LayerKey::new(Finger::Index, SiteName::Mcp),
            CloudFormat::Ply,
            Vec::new(),
        );
        assert!(matches!(
            r,
            Err(crate::CliError::Core(Error::InvalidInput(_)))
        ));
    }

    #[test]
    fn formats_parse() {
        assert_eq!("PLY".parse::<CloudFormat>().unwrap(), CloudFormat::Ply);
        assert!("obj".parse::<CloudFormat>().is_err());
    }
}
