//! Full decode path: two sensor CSV streams (separated by a 0xFF byte)
//! through extraction and triangulation. Successful localizations must
//! return finite geometry whatever the input bytes were.

#![no_main]

use libfuzzer_sys::fuzz_target;

use fieldgrasp::geom::{RotationMatrix, Vec3};
use fieldgrasp::localize::{localize_conductor, SensorRig, DEFAULT_ALPHA_MIN};
use fieldgrasp::sigproc::{extract_field_vector, SampleWindow};

fuzz_target!(|data: &[u8]| {
    let Some(split) = data.iter().position(|&b| b == 0xff) else {
        return;
    };
    let (Ok(w1), Ok(w2)) = (
        SampleWindow::from_csv(&data[..split]),
        SampleWindow::from_csv(&data[split + 1..]),
    ) else {
        return;
    };

    let extract = |w: &SampleWindow| extract_field_vector(w, w.rate() / 4.0, 1e-12);
    let (Ok(b1), Ok(b2)) = (extract(&w1), extract(&w2)) else {
        return;
    };

    let rig = SensorRig::new(RotationMatrix::identity(), Vec3::new(0.2, 0.0, 0.0)).unwrap();
    if let Ok(est) = localize_conductor(&b1, &b2, &rig, DEFAULT_ALPHA_MIN) {
        assert!(est.line.point().is_finite());
        assert!(est.line.direction().as_vec3().is_finite());
        assert!(est.angle_between_fields.is_finite());
    }
});
