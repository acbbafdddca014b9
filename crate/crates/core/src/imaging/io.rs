//! Binary Netpbm (P5 gray / P6 RGB, maxval 255) read/write, plus PNG read.

use std::fs;
use std::path::Path;

use super::{Image, PixelFormat};
use crate::error::{Error, Result};

const PNG_MAGIC: &[u8] = b"\x89PNG\r\n\x1a\n";

pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    decode_image(&bytes)
}

/// Writes P5 for `Gray8` and P6 for `Rgb8`.
pub fn write_image(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pnm(image)).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn encode_pnm(image: &Image) -> Vec<u8> {
    let magic = match image.format() {
        PixelFormat::Gray8 => "P5",
        PixelFormat::Rgb8 => "P6",
    };
    let mut out = format!("{magic}\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend_from_slice(image.pixels());
    out
}

pub fn decode_image(bytes: &[u8]) -> Result<Image> {
    if bytes.starts_with(PNG_MAGIC) {
        return decode_png(bytes);
    }
    decode_pnm(bytes)
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse {
                offset: start,
                message: format!("{what} out of range"),
            })
    }
}

fn decode_pnm(bytes: &[u8]) -> Result<Image> {
    let mut h = Header { bytes, pos: 0 };
    let format = match bytes.get(..2) {
        Some(b"P5") => PixelFormat::Gray8,
        Some(b"P6") => PixelFormat::Rgb8,
        _ => return Err(h.err("bad magic: expected P5, P6 or PNG")),
    };
    h.pos = 2;
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval_at = h.pos;
    let maxval = h.number("maxval")?;
    if maxval != 255 {
        return Err(Error::UnsupportedFormat(format!(
            "maxval {maxval} at byte {maxval_at}; only 255 is supported"
        )));
    }
    match bytes.get(h.pos) {
        Some(b) if b.is_ascii_whitespace() => h.pos += 1,
        _ => return Err(h.err("expected a single whitespace byte after maxval")),
    }
    if width == 0 || height == 0 {
        return Err(h.err("zero image dimension"));
    }
    let need = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(format.channels()))
        .ok_or_else(|| h.err("image dimensions overflow"))?;
    let data = &bytes[h.pos..];
    if data.len() < need {
        h.pos = bytes.len();
        return Err(h.err(format!("truncated pixel data: need {need} bytes, have {}", data.len())));
    }
    Image::new(width, height, format, data[..need].to_vec())
}

fn decode_png(bytes: &[u8]) -> Result<Image> {
    let perr = |e: png::DecodingError| Error::Parse {
        offset: 0,
        message: format!("png: {e}"),
    };
    let mut decoder = png::Decoder::new(bytes);
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder.read_info().map_err(perr)?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(perr)?;
    let (w, h) = (info.width as usize, info.height as usize);
    let buf = &buf[..info.buffer_size()];
    let (format, pixels): (PixelFormat, Vec<u8>) = match info.color_type {
        png::ColorType::Grayscale => (PixelFormat::Gray8, buf.to_vec()),
        png::ColorType::GrayscaleAlpha => (PixelFormat::Gray8, buf.chunks(2).map(|p| p[0]).collect()),
        png::ColorType::Rgb => (PixelFormat::Rgb8, buf.to_vec()),
        png::ColorType::Rgba => (
            PixelFormat::Rgb8,
            buf.chunks(4).flat_map(|p| [p[0], p[1], p[2]]).collect(),
        ),
        png::ColorType::Indexed => {
            return Err(Error::UnsupportedFormat("unexpanded indexed PNG".into()))
        }
    };
    Image::new(w, h, format, pixels)
}
