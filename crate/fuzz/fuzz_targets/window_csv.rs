//! Sample-window CSV: parsed windows must re-serialize losslessly and never
//! make phasor extraction panic.

#![no_main]

use libfuzzer_sys::fuzz_target;

use fieldgrasp::sigproc::{extract_field_vector, SampleWindow};

fuzz_target!(|data: &[u8]| {
    let Ok(window) = SampleWindow::from_csv(data) else {
        return;
    };
    let mut out = Vec::new();
    window
        .to_csv(&mut out)
        .expect("parsed window must serialize");
    let back = SampleWindow::from_csv(out.as_slice()).expect("round trip must parse");
    assert_eq!(back.len(), window.len());
    assert_eq!(back.bx(), window.bx());
    assert_eq!(back.by(), window.by());
    assert_eq!(back.bz(), window.bz());

    // Extraction may reject the data (all-quiet axes) but must not panic.
    let _ = extract_field_vector(&window, window.rate() / 4.0, 1e-12);
});
