//! CSV exports and the binary snapshot format.
//!
//! Snapshot files are a 16-byte header (`LCSB`, `u64` rows, `u32` elements)
//! followed by rows of little-endian `f64` pairs `(re, im)`, one per element.

use std::io::{Read, Write};

use crate::beamformer::DesignReport;
use crate::evaluation::RangeDopplerMap;
use crate::experiment::{DelayCurve, ResultTable};
use crate::filters::FirFilter;
use crate::lcmv::SnapshotBlock;
use crate::steering::ResponseGrid;
use crate::{Complex64, Error, Result};

pub const SNAPSHOT_MAGIC: [u8; 4] = *b"LCSB";

pub fn write_snapshots<W: Write>(mut w: W, x: &SnapshotBlock) -> Result<()> {
    let elements =
        u32::try_from(x.elements()).map_err(|_| Error::Dimension("too many elements".into()))?;
    w.write_all(&SNAPSHOT_MAGIC)?;
    w.write_all(&(x.rows() as u64).to_le_bytes())?;
    w.write_all(&elements.to_le_bytes())?;
    let mut buf = Vec::with_capacity(16 * x.elements());
    for n in 0..x.rows() {
        buf.clear();
        for m in 0..x.elements() {
            let v = x.get(n, m);
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshots<R: Read>(mut r: R) -> Result<SnapshotBlock> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)?;
    if header[..4] != SNAPSHOT_MAGIC {
        return Err(Error::Config("not a snapshot file (bad magic)".into()));
    }
    let rows = u64::from_le_bytes(header[4..12].try_into().unwrap()) as usize;
    let elements = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    let mut bytes = vec![0u8; rows * elements * 16];
    r.read_exact(&mut bytes)?;
    let samples: Vec<Complex64> = bytes
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    SnapshotBlock::from_rows(rows, elements, &samples)
}

/// `q_t`, `P`, then one row per tap in stacked order.
pub fn write_design_csv<W: Write>(mut w: W, report: &DesignReport) -> Result<()> {
    writeln!(w, "variant,group_delay,power")?;
    writeln!(w, "{},{},{}", report.kind, report.group_delay, report.power)?;
    writeln!(w, "index,element,tap,re,im")?;
    let g = report.weights.grid();
    for s in 0..g.elements {
        for t in 0..g.taps {
            let v = report.weights.get(t, s);
            writeln!(w, "{},{s},{t},{},{}", g.index(t, s), v.re, v.im)?;
        }
    }
    Ok(())
}

pub fn write_response_csv<W: Write>(mut w: W, grid: &ResponseGrid) -> Result<()> {
    writeln!(w, "angle_deg,omega,magnitude_db")?;
    for (i, omega) in grid.omegas.iter().enumerate() {
        for (j, theta) in grid.thetas.iter().enumerate() {
            writeln!(w, "{},{},{}", theta.to_degrees(), omega, grid.at(i, j))?;
        }
    }
    Ok(())
}

pub fn write_delay_curve_csv<W: Write>(mut w: W, curve: &DelayCurve) -> Result<()> {
    writeln!(w, "q,power,marker")?;
    for &(q, p) in &curve.points {
        writeln!(w, "{q},{p},")?;
    }
    for (label, sel) in [("E", &curve.min_power), ("F", &curve.min_latency)] {
        writeln!(w, "{},{},{label}", sel.group_delay, sel.power)?;
    }
    Ok(())
}

pub fn write_filter_csv<W: Write>(mut w: W, name: &str, filter: &FirFilter) -> Result<()> {
    writeln!(w, "filter,tap,re,im")?;
    for (i, v) in filter.taps().iter().enumerate() {
        writeln!(w, "{name},{i},{},{}", v.re, v.im)?;
    }
    Ok(())
}

/// One row per cell, power in dB (floored at -400 dB).
pub fn write_range_doppler_csv<W: Write>(mut w: W, map: &RangeDopplerMap) -> Result<()> {
    writeln!(w, "range_cell,velocity_cell,range_m,velocity_mps,power_db")?;
    let g = &map.grid;
    for l in 0..g.range_cells {
        for j in 0..g.velocity_cells {
            let p = map.get(l, j);
            let db = if p > 0.0 {
                (10.0 * p.log10()).max(-400.0)
            } else {
                -400.0
            };
            writeln!(
                w,
                "{l},{},{},{},{db}",
                g.velocity_index(j),
                g.range(l),
                g.velocity(j)
            )?;
        }
    }
    Ok(())
}

pub fn write_result_table_csv<W: Write>(mut w: W, table: &ResultTable) -> Result<()> {
    writeln!(w, "variant,mean_snr_db,se_snr_db,mean_group_delay,se_group_delay,instances,failures,n_mc,wall_clock_s")?;
    for r in &table.rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.kind,
            r.mean_snr_db,
            r.se_snr_db,
            r.mean_group_delay,
            r.se_group_delay,
            r.count,
            table.failures.len(),
            table.n_mc,
            table.wall_clock_s
        )?;
    }
    Ok(())
}

/// Per-instance scores, one row per instance and variant.
pub fn write_instances_csv<W: Write>(mut w: W, table: &ResultTable) -> Result<()> {
    writeln!(
        w,
        "instance,variant,snr_db,group_delay,power,look_direction_deg"
    )?;
    for inst in &table.instances {
        for o in &inst.outcomes {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                inst.index,
                o.kind,
                o.snr_db,
                o.group_delay,
                o.power,
                inst.look_direction.to_degrees()
            )?;
        }
    }
    Ok(())
}
