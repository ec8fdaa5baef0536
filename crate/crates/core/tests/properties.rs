use gpufreq_core::oracle::RequestRecord;
use gpufreq_core::{
    effective_global_delay, effective_global_latency, fit_dram_latency, predict, simulate_pipeline,
    total_latency_saturated, total_latency_unsaturated, CaseInputs, DelayEntry, DeviceSpec,
    DramDelayTable, ExecutionCase, FrequencyPair, KernelProfile, LatencySample, PipelineConfig,
    ScenarioGenerator,
};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn mhz() -> impl Strategy<Value = f64> {
    (300u32..=1200).prop_map(f64::from)
}

fn constant_delay_spec(delay: f64) -> DeviceSpec {
    let mut spec = DeviceSpec::gtx980();
    spec.dram_delay = DramDelayTable::new(vec![
        DelayEntry {
            mem_mhz: 400.0,
            base_delay: delay,
            bw_efficiency: 0.8,
        },
        DelayEntry {
            mem_mhz: 1000.0,
            base_delay: delay,
            bw_efficiency: 0.8,
        },
    ])
    .unwrap();
    spec
}

prop_compose! {
    fn profile()(
        gld in 1u32..=32,
        c in 0.1f64..200.0,
        hr in 0.0f64..=1.0,
        wpb in 1u32..=16,
        blocks in 1u32..=4096,
        aw_blocks in 1u32..=8,
        o in 1u32..=32,
        i in 1u32..=32,
        shared in any::<bool>(),
    ) -> KernelProfile {
        let aw = (wpb * aw_blocks).clamp(2, 64);
        let blocks = blocks.max(aw.div_ceil(wpb));
        let total = u64::from(wpb) * u64::from(blocks);
        KernelProfile {
            name: "k".into(),
            gld_trans: f64::from(gld),
            comp_inst: c * total as f64 * f64::from(o) * f64::from(gld) / 4.0,
            l2_hr: hr,
            num_blocks: blocks,
            warps_per_block: wpb,
            active_warps: aw,
            active_sms: None,
            o_itrs: o,
            i_itrs: i,
            uses_shared_memory: shared,
        }
    }
}

prop_compose! {
    fn pipeline()(
        num_warps in 1u32..=12,
        compute in 0.0f64..60.0,
        latency in 1.0f64..300.0,
        service_frac in 0.0f64..=1.0,
        trans in 1u32..=3,
        outer in 1u32..=4,
    ) -> PipelineConfig {
        PipelineConfig {
            num_warps,
            warps_per_block: num_warps,
            compute_cycles: compute,
            mem_latency: latency,
            mem_service: (latency * service_frac * 0.2).min(latency),
            trans_per_iter: trans,
            outer_iters: outer,
            shared: None,
        }
    }
}

proptest! {
    #[test]
    fn noise_free_fit_recovers_line(slope in 10.0f64..500.0, intercept in 10.0f64..500.0) {
        let samples: Vec<_> = (0..20)
            .map(|k| {
                let ratio = 0.4 + 2.1 * f64::from(k) / 19.0;
                LatencySample::new(ratio * 1000.0, 1000.0, slope * ratio + intercept)
            })
            .collect();
        let fit = fit_dram_latency(&samples).unwrap();
        prop_assert!(rel(fit.slope, slope) <= 1e-9);
        prop_assert!(rel(fit.intercept, intercept) <= 1e-9);
        prop_assert!(fit.r_squared >= 1.0 - 1e-9);

        let again: Vec<_> = samples
            .iter()
            .map(|s| LatencySample { cycles: fit.latency_cycles(s.freq), ..*s })
            .collect();
        let refit = fit_dram_latency(&again).unwrap();
        prop_assert!(rel(refit.slope, fit.slope) <= 1e-12);
        prop_assert!(rel(refit.intercept, fit.intercept) <= 1e-12);
    }

    #[test]
    fn interpolated_delay_lies_between_brackets(mem in 300.0f64..1100.0) {
        let spec = DeviceSpec::gtx980();
        let entries = spec.dram_delay.entries();
        let d = spec.dram_delay.delay_cycles(mem).unwrap();
        let lo = entries.iter().rev().find(|e| e.mem_mhz <= mem).unwrap_or(&entries[0]);
        let hi = entries.iter().find(|e| e.mem_mhz >= mem).unwrap_or(entries.last().unwrap());
        prop_assert!(d <= lo.base_delay.max(hi.base_delay) + 1e-12);
        prop_assert!(d >= lo.base_delay.min(hi.base_delay) - 1e-12);
    }

    #[test]
    fn latency_monotone_in_clocks(core in mhz(), mem in mhz(), dc in 1.0f64..300.0, dm in 1.0f64..300.0) {
        let fit = DeviceSpec::gtx980().dram_fit;
        let base = fit.latency_cycles(FrequencyPair::new(core, mem).unwrap());
        prop_assert!(fit.latency_cycles(FrequencyPair::new(core + dc, mem).unwrap()) >= base);
        prop_assert!(fit.latency_cycles(FrequencyPair::new(core, mem + dm).unwrap()) <= base);
    }

    #[test]
    fn timings_linear_in_hit_rate(core in mhz(), mem in mhz(), hr in 0.0f64..=1.0) {
        let spec = DeviceSpec::gtx980();
        let f = FrequencyPair::new(core, mem).unwrap();
        let lat = |h| effective_global_latency(&spec, h, f).unwrap();
        let del = |h| effective_global_delay(&spec, h, f).unwrap();
        prop_assert!((lat(hr) - (lat(0.0) + hr * (lat(1.0) - lat(0.0)))).abs() <= 1e-9);
        prop_assert!((del(hr) - (del(0.0) + hr * (del(1.0) - del(0.0)))).abs() <= 1e-9);
        prop_assert!(del(hr) <= lat(hr));
    }

    #[test]
    fn total_latencies_linear_in_warps(w in 1u32..512, lat in 1.0f64..900.0, del in 0.5f64..30.0, g in 1u32..8) {
        let (w, g) = (f64::from(w), f64::from(g));
        let sat = |n| total_latency_saturated(lat, del, g, n);
        let unsat = |n| total_latency_unsaturated(10.0, n, lat, g);
        prop_assert!(((sat(w + 1.0) - sat(w)) - del * g).abs() <= 1e-9);
        prop_assert!(((unsat(w + 1.0) - unsat(w)) - 10.0).abs() <= 1e-9);
    }

    #[test]
    fn classification_is_exhaustive(p in profile(), core in mhz(), mem in mhz()) {
        let spec = DeviceSpec::gtx980();
        let pred = predict(&spec, &p, FrequencyPair::new(core, mem).unwrap()).unwrap();
        prop_assert!(ExecutionCase::ALL.contains(&pred.case));
        prop_assert_eq!(pred.case.is_shared(), p.uses_shared_memory);
        prop_assert!(pred.t_active.is_finite() && pred.t_active > 0.0);
        prop_assert!(pred.t_exec_seconds > 0.0);
    }

    #[test]
    fn seconds_non_increasing_in_memory_clock(p in profile(), core in mhz(), m1 in mhz(), m2 in mhz()) {
        let spec = DeviceSpec::gtx980();
        let (lo, hi) = (m1.min(m2), m1.max(m2));
        let a = predict(&spec, &p, FrequencyPair::new(core, lo).unwrap()).unwrap();
        let b = predict(&spec, &p, FrequencyPair::new(core, hi).unwrap()).unwrap();
        if a.case == b.case {
            prop_assert!(b.t_exec_seconds <= a.t_exec_seconds * (1.0 + 1e-12));
        }
    }

    #[test]
    fn speedup_bounded_under_constant_delay(p in profile(), core in mhz(), mem in 300.0f64..600.0, k in 1.0f64..2.0) {
        let spec = constant_delay_spec(9.3);
        let a = predict(&spec, &p, FrequencyPair::new(core, mem).unwrap()).unwrap();
        let b = predict(&spec, &p, FrequencyPair::new(core, mem * k).unwrap()).unwrap();
        if a.case == b.case {
            prop_assert!(a.t_exec_seconds / b.t_exec_seconds <= k * (1.0 + 1e-12));
        }
    }

    #[test]
    fn doubling_both_clocks_halves_seconds(p in profile(), core in 300.0f64..600.0, mem in 300.0f64..600.0) {
        let spec = constant_delay_spec(9.3);
        let a = predict(&spec, &p, FrequencyPair::new(core, mem).unwrap()).unwrap();
        let b = predict(&spec, &p, FrequencyPair::new(2.0 * core, 2.0 * mem).unwrap()).unwrap();
        prop_assert_eq!(a.case, b.case);
        prop_assert!(rel(b.t_active, a.t_active) <= 1e-12);
        prop_assert!(rel(b.t_exec_seconds, a.t_exec_seconds / 2.0) <= 1e-12);
    }

    #[test]
    fn makespan_monotone_in_each_parameter(cfg in pipeline(), bump in 0usize..6) {
        let base = simulate_pipeline(&cfg).unwrap();
        let mut more = cfg;
        match bump {
            0 => more.compute_cycles += 7.5,
            1 => more.mem_latency += 11.0,
            2 => more.mem_service = (more.mem_service + 3.0).min(more.mem_latency),
            3 => more.trans_per_iter += 1,
            4 => more.outer_iters += 1,
            _ => {
                more.num_warps += 1;
                more.warps_per_block += 1;
            }
        }
        let after = simulate_pipeline(&more).unwrap();
        prop_assert!(after.makespan >= base.makespan - 1e-9, "{:?} -> {:?}", cfg, more);
    }

    #[test]
    fn simulation_is_deterministic_and_fcfs(cfg in pipeline()) {
        let a = simulate_pipeline(&cfg).unwrap();
        let b = simulate_pipeline(&cfg).unwrap();
        prop_assert_eq!(&a, &b);
        let mut sorted: Vec<&RequestRecord> = a.requests.iter().collect();
        sorted.sort_by(|x, y| x.admission.total_cmp(&y.admission));
        for pair in sorted.windows(2) {
            prop_assert!(pair[0].issue <= pair[1].issue + 1e-9);
            prop_assert!(pair[1].admission - pair[0].admission >= cfg.mem_service - 1e-9);
        }
        for r in &a.requests {
            prop_assert!(r.admission >= r.issue - 1e-9);
            prop_assert!((r.completion - r.admission - cfg.mem_latency).abs() <= 1e-9);
        }
        let last = a.per_warp_finish.iter().cloned().fold(0.0, f64::max);
        prop_assert!((last - a.makespan).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closed_forms_track_the_simulator(seed in any::<u64>(), pick in 0usize..6) {
        let spec = DeviceSpec::gtx980();
        let case = ExecutionCase::ALL[pick];
        let s = ScenarioGenerator::new(&spec, seed).generate(case).unwrap();
        let cmp = s.compare().unwrap();
        prop_assert!(cmp.within_tolerance(), "{:?} closed {} sim {}", case, cmp.closed_form, cmp.makespan);
    }
}

#[test]
fn case_inputs_round_trip_through_json() {
    let i = CaseInputs {
        avr_comp: 3.0,
        agl_lat: 500.0,
        agl_del: 9.0,
        active_warps: 64.0,
        warps_per_block: 8.0,
        gld_trans: 2.0,
        o_itrs: 4.0,
        i_itrs: 0.0,
        shm_lat: 30.0,
        uses_shared_memory: false,
    };
    let back: CaseInputs = serde_json::from_str(&serde_json::to_string(&i).unwrap()).unwrap();
    assert_eq!(back, i);
}
