use proptest::prelude::*;

use super::{check, descriptor, Check};
use partition_bandit::model::{
    build_context, context_table, frontend_profile, DeviceProfile, DnnDescriptor, LayerKind,
};

pub const CHECKS: [Check; 5] = [
    ("model: on-device context is zero", on_device_context_is_zero),
    (
        "model: input-cut MACs sum to the network total",
        input_cut_macs_sum_to_total,
    ),
    (
        "model: count and MAC columns are non-increasing",
        columns_non_increasing,
    ),
    (
        "model: front-end profile starts at 0 and never decreases",
        frontend_non_decreasing,
    ),
    ("model: table and profile match an independent recount", matches_recount),
];

fn device() -> impl Strategy<Value = DeviceProfile> {
    (0.0..100.0f64, 0.0..1000.0f64, 0.0..100.0f64, 0.0..20.0f64).prop_map(|(c, f, a, o)| DeviceProfile {
        ms_per_gmac_conv: c,
        ms_per_gmac_fc: f,
        ms_per_gmac_act: a,
        fixed_overhead_ms: o,
    })
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

pub fn on_device_context_is_zero() -> Result<(), String> {
    check("on_device_context_is_zero", descriptor(40), |desc| {
        prop_assert!(build_context(&desc, desc.on_device()).unwrap().is_zero());
        Ok(())
    })
}

pub fn input_cut_macs_sum_to_total() -> Result<(), String> {
    check("input_cut_macs_sum_to_total", descriptor(40), |desc| {
        let x = build_context(&desc, 0).unwrap();
        let macs = x.m_conv() + x.m_fc() + x.m_act();
        prop_assert!(
            close(macs, desc.total_gmacs(), 1e-9),
            "{macs} vs {}",
            desc.total_gmacs()
        );
        Ok(())
    })
}

pub fn columns_non_increasing() -> Result<(), String> {
    check("columns_non_increasing", descriptor(40), |desc| {
        let table = context_table(&desc).unwrap();
        for p in 0..table.len() {
            for q in p + 1..table.len() {
                for i in 0..6 {
                    prop_assert!(table[q][i] <= table[p][i], "column {i}: x[{q}] > x[{p}]");
                }
            }
        }
        Ok(())
    })
}

pub fn frontend_non_decreasing() -> Result<(), String> {
    check("frontend_non_decreasing", (descriptor(40), device()), |(desc, dev)| {
        let d_f = frontend_profile(&desc, &dev);
        prop_assert_eq!(d_f.len(), desc.partition_count());
        prop_assert_eq!(d_f[0], 0.0);
        for w in d_f.windows(2) {
            prop_assert!(w[1] >= w[0]);
        }
        Ok(())
    })
}

/// Straight per-row recount: walks the back-end units from the end of the
/// network, so it shares no loop structure with the library.
pub fn recount(desc: &DnnDescriptor, p: usize) -> [f64; 7] {
    let n = desc.units.len();
    let mut x = [0.0; 7];
    for i in (p..n).rev() {
        let u = &desc.units[i];
        let (mac, count) = match u.kind {
            LayerKind::Conv => (0, Some(3)),
            LayerKind::Fc => (1, Some(4)),
            LayerKind::Act => (2, Some(5)),
            LayerKind::Other => (2, None),
        };
        x[mac] += u.gmacs;
        if let Some(c) = count {
            x[c] += 1.0;
        }
    }
    x[6] = match p {
        0 => desc.input_size_mb,
        _ if p == n => 0.0,
        _ => desc.units[p - 1].output_mb,
    };
    x
}

pub fn recount_frontend(desc: &DnnDescriptor, dev: &DeviceProfile, p: usize) -> f64 {
    if p == 0 {
        return 0.0;
    }
    let compute: f64 = desc.units[..p]
        .iter()
        .rev()
        .map(|u| {
            u.gmacs
                * match u.kind {
                    LayerKind::Conv => dev.ms_per_gmac_conv,
                    LayerKind::Fc => dev.ms_per_gmac_fc,
                    LayerKind::Act | LayerKind::Other => dev.ms_per_gmac_act,
                }
        })
        .sum();
    dev.fixed_overhead_ms + compute
}

pub fn matches_recount() -> Result<(), String> {
    check("matches_recount", (descriptor(40), device()), |(desc, dev)| {
        let table = context_table(&desc).unwrap();
        let d_f = frontend_profile(&desc, &dev);
        prop_assert_eq!(table.len(), desc.units.len() + 1);
        for p in 0..table.len() {
            let want = recount(&desc, p);
            for i in 0..7 {
                prop_assert!(
                    close(table[p][i], want[i], 1e-12),
                    "x[{p}][{i}] = {} vs {}",
                    table[p][i],
                    want[i]
                );
            }
            let f = recount_frontend(&desc, &dev, p);
            prop_assert!(close(d_f[p], f, 1e-12), "d_f[{p}] = {} vs {f}", d_f[p]);
        }
        Ok(())
    })
}
