use std::io::{Read, Write};

use crate::error::{invalid, Error, Result};

/// Grayscale image, row-major, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(invalid(format!(
                "image data has {} values, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, data })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// Clamped-border read.
    pub(crate) fn at(&self, x: isize, y: isize) -> f64 {
        let xc = x.clamp(0, self.width as isize - 1) as usize;
        let yc = y.clamp(0, self.height as isize - 1) as usize;
        self.get(xc, yc)
    }

    pub fn is_square(&self) -> bool {
        self.width == self.height
    }

    /// Average-pools by an integer factor; sides must divide.
    pub fn downsample(&self, factor: usize) -> Result<Image> {
        if factor == 0 || self.width % factor != 0 || self.height % factor != 0 {
            return Err(invalid(format!("cannot downsample {}x{} by {factor}", self.width, self.height)));
        }
        let (w, h) = (self.width / factor, self.height / factor);
        let norm = 1.0 / (factor * factor) as f64;
        let mut out = Image::filled(w, h, 0.0);
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for dy in 0..factor {
                    for dx in 0..factor {
                        acc += self.get(x * factor + dx, y * factor + dy);
                    }
                }
                out.set(x, y, acc * norm);
            }
        }
        Ok(out)
    }

    /// Binary PGM (P5, maxval 255).
    pub fn write_pgm<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "P5\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self.data.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
        w.write_all(&bytes)
    }

    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_pgm(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_pgm<R: Read>(mut r: R) -> Result<Image> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        Self::from_pgm_bytes(&buf)
    }

    pub fn from_pgm_bytes(buf: &[u8]) -> Result<Image> {
        let bad = |m: &str| Error::Format(format!("PGM: {m}"));
        let mut pos = 0;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            while pos < buf.len() && (buf[pos].is_ascii_whitespace() || buf[pos] == b'#') {
                if buf[pos] == b'#' {
                    while pos < buf.len() && buf[pos] != b'\n' {
                        pos += 1;
                    }
                } else {
                    pos += 1;
                }
            }
            let start = pos;
            while pos < buf.len() && !buf[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(bad("truncated header"));
            }
            fields.push(std::str::from_utf8(&buf[start..pos]).map_err(|_| bad("non-ascii header"))?);
        }
        if fields[0] != "P5" {
            return Err(bad("expected P5 magic"));
        }
        let parse = |s: &str| s.parse::<usize>().map_err(|_| bad("bad number in header"));
        let (w, h, maxval) = (parse(fields[1])?, parse(fields[2])?, parse(fields[3])?);
        if maxval == 0 || maxval > 255 {
            return Err(bad("only 8-bit maxval is supported"));
        }
        pos += 1; // single whitespace after maxval
        let body = buf.get(pos..pos + w * h).ok_or_else(|| bad("truncated pixel data"))?;
        let data = body.iter().map(|&b| b as f64 / maxval as f64).collect();
        Image::from_data(w, h, data)
    }
}
