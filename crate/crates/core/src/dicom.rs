//! Reader for a constrained DICOM subset: explicit-VR little-endian,
//! uncompressed, 16-bit CT slices.
//!
//! Anything outside that subset is a clean error rather than a best-effort
//! guess. Slices are ordered by the third component of ImagePositionPatient,
//! never by filename.

use std::fs;
use std::path::Path;

use log::warn;
use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};
use crate::volume::Volume;

const EXPLICIT_VR_LE: &str = "1.2.840.10008.1.2.1";

const TAG_TRANSFER_SYNTAX: (u16, u16) = (0x0002, 0x0010);
const TAG_IMAGE_POSITION: (u16, u16) = (0x0020, 0x0032);
const TAG_IMAGE_ORIENTATION: (u16, u16) = (0x0020, 0x0037);
const TAG_ROWS: (u16, u16) = (0x0028, 0x0010);
const TAG_COLUMNS: (u16, u16) = (0x0028, 0x0011);
const TAG_PIXEL_SPACING: (u16, u16) = (0x0028, 0x0030);
const TAG_BITS_ALLOCATED: (u16, u16) = (0x0028, 0x0100);
const TAG_PIXEL_REPRESENTATION: (u16, u16) = (0x0028, 0x0103);
const TAG_RESCALE_INTERCEPT: (u16, u16) = (0x0028, 0x1052);
const TAG_RESCALE_SLOPE: (u16, u16) = (0x0028, 0x1053);
const TAG_PIXEL_DATA: (u16, u16) = (0x7FE0, 0x0010);

#[derive(Debug)]
struct Element {
    tag: (u16, u16),
    data: Vec<u8>,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: std::path::PathBuf,
}

impl<'a> Cursor<'a> {
    fn malformed(&self, reason: impl Into<String>) -> Error {
        Error::MalformedDicom {
            path: self.path.clone(),
            reason: reason.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(self.malformed(format!("unexpected end of file at offset {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16le(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32le(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn done(&self) -> bool {
        self.pos >= self.bytes.len()
    }

    /// One explicit-VR little-endian data element.
    fn element(&mut self) -> Result<Element> {
        let group = self.u16le()?;
        let element = self.u16le()?;
        let vr = self.take(2)?;
        if !vr.iter().all(|b| b.is_ascii_uppercase()) {
            return Err(self.malformed(format!(
                "invalid VR bytes {vr:?} for tag ({group:04X},{element:04X}); \
                 file is not explicit-VR little-endian"
            )));
        }
        let long_form = matches!(vr, b"OB" | b"OW" | b"OF" | b"SQ" | b"UT" | b"UN");
        let len = if long_form {
            self.take(2)?; // reserved
            self.u32le()? as usize
        } else {
            self.u16le()? as usize
        };
        if len == 0xFFFF_FFFF {
            return Err(self.malformed("undefined-length elements are not supported"));
        }
        let data = self.take(len)?.to_vec();
        Ok(Element {
            tag: (group, element),
            data,
        })
    }
}

struct Slice {
    rows: u16,
    cols: u16,
    pixel_spacing: [f64; 2], // [row spacing, column spacing] per the standard
    position: [f64; 3],
    slope: f64,
    intercept: f64,
    signed: bool,
    pixels: Vec<u8>,
}

fn parse_ds(data: &[u8], expect: usize, what: &str) -> Result<Vec<f64>> {
    let text = std::str::from_utf8(data)
        .map_err(|_| Error::InconsistentGeometry(format!("{what}: non-ASCII decimal string")))?;
    let values: Vec<f64> = text
        .trim_end_matches(['\0', ' '])
        .split('\\')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::InconsistentGeometry(format!("{what}: bad decimal string ({e})")))?;
    if values.len() != expect {
        return Err(Error::InconsistentGeometry(format!(
            "{what}: expected {expect} values, got {}",
            values.len()
        )));
    }
    Ok(values)
}

fn parse_us(data: &[u8], what: &str) -> Result<u16> {
    if data.len() != 2 {
        return Err(Error::InconsistentGeometry(format!(
            "{what}: expected 2-byte US, got {} bytes",
            data.len()
        )));
    }
    Ok(u16::from_le_bytes([data[0], data[1]]))
}

fn required<'e>(elements: &'e [Element], tag: (u16, u16)) -> Result<&'e Element> {
    elements.iter().find(|e| e.tag == tag).ok_or({
        Error::MissingRequiredTag {
            group: tag.0,
            element: tag.1,
        }
    })
}

fn optional<'e>(elements: &'e [Element], tag: (u16, u16)) -> Option<&'e Element> {
    elements.iter().find(|e| e.tag == tag)
}

fn parse_slice(path: &Path) -> Result<Slice> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut cur = Cursor {
        bytes: &bytes,
        pos: 0,
        path: path.to_path_buf(),
    };
    let preamble = cur.take(132)?;
    if &preamble[128..132] != b"DICM" {
        return Err(cur.malformed("missing DICM magic after 128-byte preamble"));
    }

    // File meta group (0002,xxxx) is always explicit-VR little-endian.
    let mut elements: Vec<Element> = Vec::new();
    let mut transfer_syntax: Option<String> = None;
    while !cur.done() {
        let el = cur.element()?;
        if el.tag == TAG_TRANSFER_SYNTAX {
            let uid = String::from_utf8_lossy(&el.data)
                .trim_end_matches(['\0', ' '])
                .to_string();
            transfer_syntax = Some(uid);
        }
        if el.tag.0 != 0x0002 {
            match transfer_syntax.as_deref() {
                Some(EXPLICIT_VR_LE) => {}
                Some(other) => return Err(Error::UnsupportedTransferSyntax(other.to_string())),
                None => {
                    return Err(Error::MissingRequiredTag {
                        group: 0x0002,
                        element: 0x0010,
                    })
                }
            }
        }
        elements.push(el);
    }

    if let Some(el) = optional(&elements, TAG_IMAGE_ORIENTATION) {
        let iop = parse_ds(&el.data, 6, "ImageOrientationPatient")?;
        let axial = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        if iop
            .iter()
            .zip(axial.iter())
            .any(|(a, b)| (a - b).abs() > 1e-3)
        {
            return Err(Error::InconsistentGeometry(format!(
                "non-axial ImageOrientationPatient {iop:?} is not supported"
            )));
        }
    }

    let rows = parse_us(&required(&elements, TAG_ROWS)?.data, "Rows")?;
    let cols = parse_us(&required(&elements, TAG_COLUMNS)?.data, "Columns")?;
    let bits = parse_us(
        &required(&elements, TAG_BITS_ALLOCATED)?.data,
        "BitsAllocated",
    )?;
    if bits != 16 {
        return Err(Error::InconsistentGeometry(format!(
            "only BitsAllocated=16 is supported, got {bits}"
        )));
    }
    let signed = parse_us(
        &required(&elements, TAG_PIXEL_REPRESENTATION)?.data,
        "PixelRepresentation",
    )? == 1;
    let spacing = parse_ds(
        &required(&elements, TAG_PIXEL_SPACING)?.data,
        2,
        "PixelSpacing",
    )?;
    let position = parse_ds(
        &required(&elements, TAG_IMAGE_POSITION)?.data,
        3,
        "ImagePositionPatient",
    )?;

    let slope = match optional(&elements, TAG_RESCALE_SLOPE) {
        Some(el) => parse_ds(&el.data, 1, "RescaleSlope")?[0],
        None => {
            warn!("{}: missing RescaleSlope, defaulting to 1", path.display());
            1.0
        }
    };
    let intercept = match optional(&elements, TAG_RESCALE_INTERCEPT) {
        Some(el) => parse_ds(&el.data, 1, "RescaleIntercept")?[0],
        None => {
            warn!(
                "{}: missing RescaleIntercept, defaulting to 0",
                path.display()
            );
            0.0
        }
    };

    let pixels = required(&elements, TAG_PIXEL_DATA)?.data.clone();
    let expected = rows as usize * cols as usize * 2;
    if pixels.len() != expected {
        return Err(Error::MalformedDicom {
            path: path.to_path_buf(),
            reason: format!(
                "PixelData length {} != Rows*Columns*2 = {expected}",
                pixels.len()
            ),
        });
    }

    Ok(Slice {
        rows,
        cols,
        pixel_spacing: [spacing[0], spacing[1]],
        position: [position[0], position[1], position[2]],
        slope,
        intercept,
        signed,
        pixels,
    })
}

fn rescale_to_hu(stored: f64, slope: f64, intercept: f64) -> i16 {
    (slope * stored + intercept)
        .round()
        .clamp(-32768.0, 32767.0) as i16
}

/// Load every slice file in `directory` into one volume, sorted by
/// ascending patient-z, with stored values rescaled to Hounsfield units.
pub fn read_dicom_series(directory: &Path) -> Result<Volume> {
    let mut files: Vec<_> = fs::read_dir(directory)
        .map_err(|e| Error::io(directory, e))?
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(directory, e))?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.is_file())
        .collect();
    files.sort(); // only for stable error reporting; slice order comes from geometry
    if files.is_empty() {
        return Err(Error::InconsistentGeometry(format!(
            "no files in {}",
            directory.display()
        )));
    }

    let mut slices = Vec::with_capacity(files.len());
    for f in &files {
        slices.push(parse_slice(f)?);
    }

    let (rows0, cols0) = (slices[0].rows, slices[0].cols);
    let pixel_spacing0 = slices[0].pixel_spacing;
    {
        let first = &slices[0];
        for s in &slices[1..] {
            if s.rows != first.rows || s.cols != first.cols {
                return Err(Error::InconsistentGeometry(format!(
                    "slice size {}x{} != {}x{}",
                    s.cols, s.rows, first.cols, first.rows
                )));
            }
            if (s.pixel_spacing[0] - first.pixel_spacing[0]).abs() > 1e-9
                || (s.pixel_spacing[1] - first.pixel_spacing[1]).abs() > 1e-9
            {
                return Err(Error::InconsistentGeometry(format!(
                    "PixelSpacing {:?} != {:?}",
                    s.pixel_spacing, first.pixel_spacing
                )));
            }
        }
    }

    slices.sort_by(|a, b| a.position[2].total_cmp(&b.position[2]));

    let z_spacing = if slices.len() > 1 {
        let mut gaps: Vec<f64> = slices
            .windows(2)
            .map(|w| w[1].position[2] - w[0].position[2])
            .collect();
        gaps.sort_by(f64::total_cmp);
        let median = gaps[gaps.len() / 2];
        if median <= 0.0 {
            return Err(Error::InconsistentGeometry(
                "duplicate or non-increasing slice positions".to_string(),
            ));
        }
        for &gap in &gaps {
            if (gap - median).abs() > 0.1 * median {
                return Err(Error::NonUniformSliceSpacing { gap, median });
            }
        }
        median
    } else {
        warn!("single-slice series: defaulting z spacing to 1 mm");
        1.0
    };

    let (nx, ny, nz) = (cols0 as usize, rows0 as usize, slices.len());
    let mut scalars = Vec::with_capacity(nx * ny * nz);
    for s in &slices {
        for chunk in s.pixels.chunks_exact(2) {
            let stored = if s.signed {
                i16::from_le_bytes([chunk[0], chunk[1]]) as f64
            } else {
                u16::from_le_bytes([chunk[0], chunk[1]]) as f64
            };
            scalars.push(rescale_to_hu(stored, s.slope, s.intercept));
        }
    }

    let origin = slices[0].position;
    Volume::new(
        (nx, ny, nz),
        // PixelSpacing is [row (y) spacing, column (x) spacing].
        Vector3::new(pixel_spacing0[1], pixel_spacing0[0], z_spacing),
        Point3::new(origin[0], origin[1], origin[2]),
        scalars,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rescale_examples() {
        assert_eq!(rescale_to_hu(1024.0, 1.0, -1024.0), 0);
        assert_eq!(rescale_to_hu(0.0, 1.0, 0.0), 0);
        assert_eq!(rescale_to_hu(100.0, 2.0, -50.0), 150);
        // clamped at the int16 range
        assert_eq!(rescale_to_hu(65535.0, 1.0, 0.0), 32767);
    }
}
