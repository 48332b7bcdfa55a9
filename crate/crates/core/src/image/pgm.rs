use super::GrayImage;
use crate::error::{Error, Result};

fn skip_space_and_comments(bytes: &[u8], mut at: usize) -> usize {
    while at < bytes.len() {
        match bytes[at] {
            b'#' => {
                while at < bytes.len() && bytes[at] != b'\n' {
                    at += 1;
                }
            }
            b if b.is_ascii_whitespace() => at += 1,
            _ => break,
        }
    }
    at
}

fn header_int(bytes: &[u8], at: &mut usize, what: &str) -> Result<usize> {
    *at = skip_space_and_comments(bytes, *at);
    let start = *at;
    while *at < bytes.len() && bytes[*at].is_ascii_digit() {
        *at += 1;
    }
    std::str::from_utf8(&bytes[start..*at])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::invalid(format!("PGM header: bad {what}")))
}

/// Decodes a binary (P5) PGM with `maxval <= 255`. Smaller maxvals are
/// rescaled to the full 8-bit range with `round(v * 255 / maxval)`.
pub fn load_pgm(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        let magic = String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned();
        return Err(Error::invalid(format!("unsupported image format {magic:?}, expected P5")));
    }
    let mut at = 2;
    let width = header_int(bytes, &mut at, "width")?;
    let height = header_int(bytes, &mut at, "height")?;
    let maxval = header_int(bytes, &mut at, "maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::invalid(format!("unsupported PGM maxval {maxval}")));
    }
    match bytes.get(at) {
        Some(b) if b.is_ascii_whitespace() => at += 1,
        _ => return Err(Error::invalid("PGM header: missing separator before payload")),
    }
    let count = width * height;
    let payload = bytes
        .get(at..at + count)
        .ok_or_else(|| Error::invalid(format!("truncated PGM payload, expected {count} bytes")))?;
    if let Some(v) = payload.iter().find(|&&v| v as usize > maxval) {
        return Err(Error::invalid(format!("PGM sample {v} exceeds maxval {maxval}")));
    }
    let pixels = if maxval == 255 {
        payload.to_vec()
    } else {
        payload
            .iter()
            .map(|&v| ((2 * 255 * v as usize + maxval) / (2 * maxval)) as u8)
            .collect()
    };
    GrayImage::new(width, height, pixels)
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.pixels());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_parse() {
        let mut bytes = b"P5\n2 2\n255\n".to_vec();
        bytes.extend([0, 2, 4, 6]);
        let img = load_pgm(&bytes).unwrap();
        assert_eq!((img.width(), img.height()), (2, 2));
        assert_eq!(img.pixels(), [0, 2, 4, 6]);
    }

    #[test]
    fn comments_in_header() {
        let mut bytes = b"P5 # made by hand\n# another\n3 1 255\n".to_vec();
        bytes.extend([9, 8, 7]);
        assert_eq!(load_pgm(&bytes).unwrap().pixels(), [9, 8, 7]);
    }

    #[test]
    fn low_maxval_rescaled() {
        let mut bytes = b"P5\n2 1\n1\n".to_vec();
        bytes.extend([0, 1]);
        assert_eq!(load_pgm(&bytes).unwrap().pixels(), [0, 255]);
        let mut bytes = b"P5\n3 1\n2\n".to_vec();
        bytes.extend([0, 1, 2]);
        // 127.5 rounds half-up
        assert_eq!(load_pgm(&bytes).unwrap().pixels(), [0, 128, 255]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(load_pgm(b"P6\n1 1\n255\n\x00").is_err());
        assert!(load_pgm(b"P5\n1 1\n65535\n\x00\x00").is_err());
        assert!(load_pgm(b"P5\n2 2\n255\n\x00\x01").is_err());
        assert!(load_pgm(b"P5\n1 1\n1\n\x05").is_err());
    }

    #[test]
    fn encode_then_load() {
        let img = GrayImage::from_rows(&[&[1, 2, 3], &[4, 5, 6]]).unwrap();
        assert_eq!(load_pgm(&encode_pgm(&img)).unwrap(), img);
    }
}
