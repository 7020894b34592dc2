//! Checkpoint container and CSV formatting.

use proptest::prelude::*;
use rigidflow::io::{csv_line, fmt_float, read_checkpoint, write_checkpoint, MAGIC};
use serde_json::json;

proptest! {
    #[test]
    fn checkpoint_round_trip(payload in prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 0..64), n in 0u64..1000) {
        let header = json!({ "kind": "test", "n": n });
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &header, &payload).unwrap();
        prop_assert_eq!(&buf[..8], MAGIC);
        let back = read_checkpoint(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(back.header, header);
        prop_assert_eq!(back.payload.len(), payload.len());
        for (a, b) in back.payload.iter().zip(&payload) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn float_text_round_trips(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
    }
}

#[test]
fn rejects_bad_magic_and_ragged_payload() {
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, &json!({}), &[1.0, 2.0]).unwrap();
    let mut bad = buf.clone();
    bad[0] = b'X';
    assert!(read_checkpoint(&mut bad.as_slice()).is_err());
    buf.pop();
    assert!(read_checkpoint(&mut buf.as_slice()).is_err());
}

#[test]
fn csv_rows_end_with_newline() {
    assert_eq!(csv_line(&[1.0, -0.5]), "1.0000000000000000e0,-5.0000000000000000e-1\n");
}
