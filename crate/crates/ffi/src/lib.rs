//! C interface to the mesh, rendering and metrics parts of `texfuse`.
//!
//! Every fallible call returns a [`TfStatus`]; on failure the message is kept
//! per thread and read with [`tf_last_error`]. Handles are opaque and owned
//! by the caller until passed to the matching `_free` function. Images are
//! tightly packed row-major 8-bit RGB, masks one byte per pixel (nonzero =
//! set).

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use texfuse::camera::{make_turntable_camera, RenderSettings};
use texfuse::distance::distance_transform;
use texfuse::image_buf::{ColorImage, Mask};
use texfuse::inpaint::{view_prompt, PromptStyle};
use texfuse::mesh::{generate_test_mesh, load_mesh, MeshKind, TriangleMesh};
use texfuse::metrics::{psnr, ssim};
use texfuse::patterns::TexturePattern;
use texfuse::raster::render_textured;
use texfuse::texture::TextureMap;
use texfuse::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    InvalidMesh = 4,
    DimensionMismatch = 5,
    BufferTooSmall = 6,
    Internal = 7,
}

/// Opaque mesh handle.
pub struct TfMesh(TriangleMesh);

/// Opaque texture handle.
pub struct TfTexture(TextureMap);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

struct Failure(TfStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } | Error::Image(_) => TfStatus::Io,
            Error::MeshParse { .. } | Error::NonTriangularFace { .. } | Error::MissingUvs | Error::InvalidMesh(_) => {
                TfStatus::InvalidMesh
            }
            Error::DimensionMismatch(_) => TfStatus::DimensionMismatch,
            Error::UnknownMeshKind(_) | Error::Config(_) => TfStatus::InvalidArgument,
            _ => TfStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

fn fail<T>(status: TfStatus, message: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, message.into()))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TfStatus {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|panic| {
        let msg = panic
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| panic.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "panic".into());
        fail(TfStatus::Internal, format!("internal error: {msg}"))
    });
    match outcome {
        Ok(()) => {
            LAST_ERROR.with(|e| e.borrow_mut().clear());
            TfStatus::Ok
        }
        Err(Failure(status, message)) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = message);
            status
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return fail(TfStatus::NullPointer, format!("{name} is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(TfStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .map_or_else(|| fail(TfStatus::NullPointer, format!("{name} is null")), Ok)
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if p.is_null() {
        return fail(TfStatus::NullPointer, format!("{name} is null"));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_out<'a, T>(p: *mut T, len: usize, name: &str) -> Result<&'a mut [T], Failure> {
    if p.is_null() {
        return fail(TfStatus::NullPointer, format!("{name} is null"));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn write_out<T>(out: *mut T, value: T, name: &str) -> Result<(), Failure> {
    if out.is_null() {
        return fail(TfStatus::NullPointer, format!("{name} is null"));
    }
    out.write(value);
    Ok(())
}

fn pixel_count(width: usize, height: usize) -> Result<usize, Failure> {
    match width.checked_mul(height) {
        Some(n) if n > 0 => Ok(n),
        _ => fail(TfStatus::InvalidArgument, format!("bad image size {width}x{height}")),
    }
}

fn rgb_image(data: &[u8], width: usize, height: usize) -> ColorImage {
    ColorImage::from_fn(width, height, |x, y| {
        let i = 3 * (y * width + x);
        [data[i], data[i + 1], data[i + 2]].map(|c| c as f64 / 255.0)
    })
}

/// Copies `text` with a trailing NUL into `buf` when it fits and stores the
/// required size (including the NUL) in `required`.
unsafe fn write_text(text: &str, buf: *mut c_char, len: usize, required: *mut usize) -> Result<(), Failure> {
    let needed = text.len() + 1;
    if !required.is_null() {
        required.write(needed);
    }
    if buf.is_null() || len < needed {
        return fail(TfStatus::BufferTooSmall, format!("need {needed} bytes, got {len}"));
    }
    let out = std::slice::from_raw_parts_mut(buf as *mut u8, needed);
    out[..text.len()].copy_from_slice(text.as_bytes());
    out[text.len()] = 0;
    Ok(())
}

/// NUL-terminated library version; static storage.
#[no_mangle]
pub extern "C" fn tf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copies the calling thread's last error message into `buf`. Returns
/// `BufferTooSmall` (and sets `required`) when it does not fit.
///
/// # Safety
/// `buf` must be writable for `len` bytes; `required` may be null.
#[no_mangle]
pub unsafe extern "C" fn tf_last_error(buf: *mut c_char, len: usize, required: *mut usize) -> TfStatus {
    let message = LAST_ERROR.with(|e| e.borrow().clone());
    match write_text(&message, buf, len, required) {
        Ok(()) => TfStatus::Ok,
        Err(Failure(status, _)) => status,
    }
}

/// Builds a procedural test mesh: `kind` is `uv_sphere`, `cube` or `capsule`.
///
/// # Safety
/// `kind` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tf_mesh_generate(kind: *const c_char, subdivision: usize, out: *mut *mut TfMesh) -> TfStatus {
    guard(|| {
        let kind: MeshKind = str_arg(kind, "kind")?.parse()?;
        let mesh = generate_test_mesh(kind, subdivision)?;
        write_out(out, Box::into_raw(Box::new(TfMesh(mesh))), "out")
    })
}

/// Loads a triangulated OBJ with texture coordinates.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tf_mesh_load(path: *const c_char, out: *mut *mut TfMesh) -> TfStatus {
    guard(|| {
        let mesh = load_mesh(Path::new(str_arg(path, "path")?))?;
        write_out(out, Box::into_raw(Box::new(TfMesh(mesh))), "out")
    })
}

/// # Safety
/// `mesh` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn tf_mesh_free(mesh: *mut TfMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// # Safety
/// `mesh` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn tf_mesh_counts(mesh: *const TfMesh, vertices: *mut usize, faces: *mut usize) -> TfStatus {
    guard(|| {
        let mesh = &ref_arg(mesh, "mesh")?.0;
        write_out(vertices, mesh.vertex_count(), "vertices")?;
        write_out(faces, mesh.face_count(), "faces")
    })
}

/// Renders a named pattern (`checker`, `stripes`, `solid`) as a square texture.
///
/// # Safety
/// `pattern` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tf_texture_pattern(pattern: *const c_char, size: usize, out: *mut *mut TfTexture) -> TfStatus {
    guard(|| {
        let pattern: TexturePattern = str_arg(pattern, "pattern")?.parse()?;
        if size == 0 {
            return fail(TfStatus::InvalidArgument, "texture size must be positive");
        }
        write_out(out, Box::into_raw(Box::new(TfTexture(pattern.render(size)))), "out")
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tf_texture_load(path: *const c_char, out: *mut *mut TfTexture) -> TfStatus {
    guard(|| {
        let texture = TextureMap::load_png(Path::new(str_arg(path, "path")?))?;
        write_out(out, Box::into_raw(Box::new(TfTexture(texture))), "out")
    })
}

/// # Safety
/// `texture` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn tf_texture_free(texture: *mut TfTexture) {
    if !texture.is_null() {
        drop(Box::from_raw(texture));
    }
}

/// Renders the textured mesh from the turntable camera at `azimuth` degrees
/// into `out_rgb` (`size * size * 3` bytes, white background).
///
/// # Safety
/// Handles must be live and `out_rgb` writable for `out_len` bytes.
#[no_mangle]
pub unsafe extern "C" fn tf_render_view(
    mesh: *const TfMesh,
    texture: *const TfTexture,
    azimuth: f64,
    size: usize,
    out_rgb: *mut u8,
    out_len: usize,
) -> TfStatus {
    guard(|| {
        let mesh = &ref_arg(mesh, "mesh")?.0;
        let texture = &ref_arg(texture, "texture")?.0;
        let needed = pixel_count(size, size)? * 3;
        if out_len < needed {
            return fail(TfStatus::BufferTooSmall, format!("need {needed} bytes, got {out_len}"));
        }
        if !azimuth.is_finite() {
            return fail(TfStatus::InvalidArgument, "azimuth must be finite");
        }
        let out = slice_out(out_rgb, needed, "out_rgb")?;
        let camera = make_turntable_camera(azimuth, &RenderSettings::square(size));
        let image = render_textured(mesh, texture, &camera).to_rgb8();
        out.copy_from_slice(image.as_raw());
        Ok(())
    })
}

/// Euclidean distance from each set pixel to the nearest unset one.
///
/// # Safety
/// `mask` must be readable and `out` writable for `width * height` elements.
#[no_mangle]
pub unsafe extern "C" fn tf_distance_transform(
    mask: *const u8,
    width: usize,
    height: usize,
    out: *mut f64,
) -> TfStatus {
    guard(|| {
        let n = pixel_count(width, height)?;
        let mask = slice_arg(mask, n, "mask")?;
        let out = slice_out(out, n, "out")?;
        let mask = Mask {
            width,
            height,
            data: mask.iter().map(|&b| b != 0).collect(),
        };
        out.copy_from_slice(&distance_transform(&mask).data);
        Ok(())
    })
}

/// PSNR in dB between two RGB images (capped for identical inputs).
///
/// # Safety
/// `a` and `b` must be readable for `width * height * 3` bytes.
#[no_mangle]
pub unsafe extern "C" fn tf_psnr(a: *const u8, b: *const u8, width: usize, height: usize, out: *mut f64) -> TfStatus {
    guard(|| {
        let n = pixel_count(width, height)? * 3;
        let a = rgb_image(slice_arg(a, n, "a")?, width, height);
        let b = rgb_image(slice_arg(b, n, "b")?, width, height);
        write_out(out, psnr(&a, &b, None)?, "out")
    })
}

/// Mean SSIM on luma with an 11×11 Gaussian window; both sides must be at
/// least 11 pixels.
///
/// # Safety
/// `a` and `b` must be readable for `width * height * 3` bytes.
#[no_mangle]
pub unsafe extern "C" fn tf_ssim(a: *const u8, b: *const u8, width: usize, height: usize, out: *mut f64) -> TfStatus {
    guard(|| {
        let n = pixel_count(width, height)? * 3;
        let a = rgb_image(slice_arg(a, n, "a")?, width, height);
        let b = rgb_image(slice_arg(b, n, "b")?, width, height);
        write_out(out, ssim(&a, &b)?, "out")
    })
}

/// Inpainting prompt for a turntable azimuth. Same buffer contract as
/// [`tf_last_error`].
///
/// # Safety
/// `buf` must be writable for `len` bytes; `required` may be null.
#[no_mangle]
pub unsafe extern "C" fn tf_view_prompt(azimuth: f64, buf: *mut c_char, len: usize, required: *mut usize) -> TfStatus {
    guard(|| {
        if !azimuth.is_finite() {
            return fail(TfStatus::InvalidArgument, "azimuth must be finite");
        }
        write_text(&view_prompt(azimuth, PromptStyle::FrontPipeline), buf, len, required)
    })
}
