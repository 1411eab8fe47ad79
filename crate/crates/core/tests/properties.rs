mod common;

use std::sync::Arc;

use proptest::prelude::*;

use ehrsynth::data::{
    decode_records, encode_records, postprocess_batch, postprocess_sample, Cell, Column, ColumnKind, FeatureSchema,
    RecordMatrix,
};
use ehrsynth::diffusion::{precondition_coefficients, NoiseSchedule};
use ehrsynth::eval::{correlation_matrix_distance, mca_distance, prevalence};
use ehrsynth::nn::Matrix;
use ehrsynth::stats::fixed_histogram;

use common::binary_records;

const LEVELS: [&str; 3] = ["a", "b", "c"];
const CONT: (f64, f64) = (-5.0, 20.0);

fn mixed_schema() -> Arc<FeatureSchema> {
    let col = |name: &str, kind| Column { name: name.into(), kind };
    Arc::new(
        FeatureSchema::new(vec![
            col("flag", ColumnKind::Binary),
            col("group", ColumnKind::Categorical { levels: LEVELS.iter().map(|s| s.to_string()).collect() }),
            col("dose", ColumnKind::Continuous { min: CONT.0, max: CONT.1 }),
            col("other", ColumnKind::Binary),
        ])
        .unwrap(),
    )
}

fn raw_row() -> impl Strategy<Value = Vec<Cell>> {
    (any::<bool>(), 0..LEVELS.len(), CONT.0..=CONT.1, any::<bool>()).prop_map(|(f, g, d, o)| {
        vec![
            Cell::Binary(f),
            Cell::Categorical(LEVELS[g].into()),
            Cell::Continuous(d),
            Cell::Binary(o),
        ]
    })
}

fn binary_matrix(max_rows: usize, cols: usize) -> impl Strategy<Value = Matrix<f64>> {
    (2..max_rows).prop_flat_map(move |rows| {
        prop::collection::vec(any::<bool>(), rows * cols).prop_map(move |bits| {
            Matrix::from_vec(rows, cols, bits.into_iter().map(|b| f64::from(u8::from(b))).collect()).unwrap()
        })
    })
}

fn permuted(m: &RecordMatrix, seed: u64) -> RecordMatrix {
    let mut order: Vec<usize> = (0..m.row_count()).collect();
    // cheap deterministic shuffle; any permutation will do
    let mut state = seed | 1;
    for i in (1..order.len()).rev() {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        order.swap(i, (state % (i as u64 + 1)) as usize);
    }
    m.select_rows(&order)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn encode_decode_round_trip(rows in prop::collection::vec(raw_row(), 1..20)) {
        let schema = mixed_schema();
        let encoded = encode_records(&rows, &schema).unwrap();
        prop_assert!(encoded.data().as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
        let decoded = decode_records(&encoded);
        prop_assert_eq!(decoded.len(), rows.len());
        for (back, orig) in decoded.iter().zip(&rows) {
            for (b, o) in back.iter().zip(orig) {
                match (b, o) {
                    (Cell::Continuous(b), Cell::Continuous(o)) => prop_assert!((b - o).abs() <= 1e-9 * (CONT.1 - CONT.0)),
                    _ => prop_assert_eq!(b, o),
                }
            }
        }
    }

    #[test]
    fn postprocess_is_valid_and_idempotent(raw in prop::collection::vec(-3.0f64..4.0, 6)) {
        let schema = mixed_schema();
        let once = postprocess_sample(&raw, &schema).unwrap();
        let twice = postprocess_sample(&once, &schema).unwrap();
        prop_assert_eq!(&once, &twice);
        let batch = postprocess_batch(&Matrix::from_vec(1, 6, raw).unwrap(), &schema).unwrap();
        prop_assert!(batch.is_decoded_valid());
        prop_assert_eq!(batch.data().as_slice(), &once[..]);
    }

    #[test]
    fn utility_metrics_ignore_row_order(real in binary_matrix(30, 5), synth_seed in any::<u64>(), perm in any::<u64>()) {
        let real = binary_records(real);
        // synthetic set of equal size so MCAD is defined
        let synth = permuted(&real, synth_seed);
        let flipped = {
            let mut m = synth.data().clone();
            m.as_mut_slice()[0] = 1.0 - m.as_slice()[0];
            binary_records(m)
        };
        let shuffled = permuted(&flipped, perm);

        let (p, q) = (prevalence(&flipped).unwrap(), prevalence(&shuffled).unwrap());
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        let (c1, c2) = (
            correlation_matrix_distance(&real, &flipped).unwrap(),
            correlation_matrix_distance(&real, &shuffled).unwrap(),
        );
        prop_assert!((c1 - c2).abs() < 1e-12);
        let (m1, m2) = (mca_distance(&real, &flipped, 20).unwrap(), mca_distance(&real, &shuffled, 20).unwrap());
        prop_assert!((m1 - m2).abs() < 1e-12);
    }

    #[test]
    fn histogram_counts_every_value(values in prop::collection::vec(-10.0f64..10.0, 0..200), bins in 1usize..30) {
        let h = fixed_histogram(&values, bins, -5.0, 5.0).unwrap();
        prop_assert_eq!(h.bins(), bins);
        prop_assert_eq!(h.total(), values.len() as u64);
        prop_assert_eq!(h.edges.len(), bins + 1);
        prop_assert_eq!(h.edges[0], -5.0);
        prop_assert_eq!(h.edges[bins], 5.0);
    }

    #[test]
    fn ladder_endpoints_and_order(
        sigma_min in 1e-3f64..1.0,
        span in 1.5f64..500.0,
        rho in 1.0f64..10.0,
        steps in 2usize..64,
    ) {
        let schedule = NoiseSchedule { sigma_min, sigma_max: sigma_min * span, rho, steps, ..NoiseSchedule::default() };
        let t = schedule.discretize();
        prop_assert_eq!(t.len(), steps + 1);
        prop_assert_eq!(t[0], schedule.sigma_max);
        prop_assert_eq!(t[steps - 1], sigma_min);
        prop_assert_eq!(t[steps], 0.0);
        prop_assert!(t.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn coefficient_identities(log_sigma in -7.0f64..7.0, sigma_data in 0.05f64..2.0) {
        let sigma = log_sigma.exp();
        let c = precondition_coefficients(sigma, sigma_data).unwrap();
        let total = sigma * sigma + sigma_data * sigma_data;
        let sd2 = sigma_data * sigma_data;
        prop_assert!((c.c_in * c.c_in * total - 1.0).abs() < 1e-6);
        prop_assert!((c.c_out * c.c_out + c.c_skip * c.c_skip * total - sd2).abs() / sd2 < 1e-6);
    }
}
