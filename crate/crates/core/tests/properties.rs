mod common;

use std::collections::BTreeSet;
use std::sync::{Arc, OnceLock};

use proptest::prelude::*;

use lineopt::catalog::{default_catalog, ProblemCatalog, HOURS_PER_SLOT, MONTHS, SLOTS_PER_DAY, STAGES};
use lineopt::encoding::{gray, gray_inverse, BitString, Codec, SchemeKind, TripleCodec, TwelveBodyCodec};
use lineopt::freestage::{line_estimate, reduce_space, DevMode, PgKey, ReducedSpace};
use lineopt::simulator::{simulate, LineConfig, ShopState};
use lineopt::space::{SearchSpace, TwelveBodySpace};

fn catalog() -> &'static ProblemCatalog {
    static C: OnceLock<ProblemCatalog> = OnceLock::new();
    C.get_or_init(default_catalog)
}

fn yes_dev_lists() -> &'static ReducedSpace {
    static S: OnceLock<ReducedSpace> = OnceLock::new();
    S.get_or_init(|| reduce_space(catalog(), 0.05, DevMode::Yes).unwrap())
}

/// A space whose stage lists are prefixes of the yesDev 5% lists.
fn cut_space(sizes: [usize; STAGES]) -> ReducedSpace {
    let base = yes_dev_lists();
    let lists = std::array::from_fn(|k| base.stage(k)[..sizes[k].min(base.stage(k).len())].to_vec());
    ReducedSpace::from_lists(base.margin(), DevMode::Yes, base.annual_target(), lists).unwrap()
}

fn config_strategy(dev: DevMode) -> impl Strategy<Value = LineConfig> {
    let n_shifts = catalog().n_shifts() as u8;
    let rate = match dev {
        DevMode::No => Just(catalog().nominal_rate_id()).boxed(),
        DevMode::Yes => (1..=catalog().n_rates() as u8).boxed(),
    };
    proptest::array::uniform6((1..=n_shifts, rate))
        .prop_map(|shops| LineConfig::new(shops.map(|(s, r)| ShopState::new(s, r))))
}

/// Scheduled hours per month counted slot by slot from the calendar.
fn hours_by_slots(shift: u8) -> [f64; MONTHS] {
    let cat = catalog();
    let cal = cat.calendar();
    let schedule = cat.shift(shift);
    let mut hours = [0.0; MONTHS];
    for (day, &month) in cal.day_months().iter().enumerate() {
        let base = cal.weekday(day as u32) * SLOTS_PER_DAY;
        let active = (0..SLOTS_PER_DAY).filter(|s| schedule.is_active(base + s)).count();
        hours[month] += active as f64 * HOURS_PER_SLOT;
    }
    hours
}

fn stage_annual(shops: [ShopState; 2]) -> f64 {
    shops
        .iter()
        .map(|s| hours_by_slots(s.shift).iter().sum::<f64>() * catalog().rate(s.rate))
        .sum()
}

proptest! {
    #[test]
    fn gray_code_is_an_adjacent_bijection(n in 0u64..(1 << 40)) {
        prop_assert_eq!(gray_inverse(gray(n)), n);
        prop_assert_eq!((gray(n) ^ gray(n + 1)).count_ones(), 1);
    }

    #[test]
    fn triple_codecs_are_bijections(
        sizes in proptest::array::uniform3(1usize..40),
        picks in proptest::array::uniform3(any::<prop::sample::Index>()),
        raw in proptest::collection::vec(0u8..2, 64),
        chained in any::<bool>(),
    ) {
        let space = Arc::new(cut_space(sizes));
        let key = if chained { PgKey::Chained } else { PgKey::FirstStage };
        let triple: Vec<u32> = (0..STAGES).map(|k| picks[k].index(space.stage(k).len()) as u32).collect();
        for scheme in SchemeKind::ALL {
            let codec = TripleCodec::new(space.clone(), scheme, key);
            let bits = codec.encode(&triple);
            prop_assert_eq!(bits.len(), codec.n_bits());
            prop_assert_eq!(codec.decode(&bits).unwrap(), triple.clone());
            let code = BitString::from_bits(raw[..codec.n_bits()].to_vec());
            if let Ok(point) = codec.decode(&code) {
                prop_assert!(space.contains(&point));
                prop_assert_eq!(codec.encode(&point), code);
            }
        }
    }

    #[test]
    fn twelve_body_codec_is_a_bijection(
        point in proptest::array::uniform6(0u32..75),
        raw in proptest::collection::vec(0u8..2, 42),
    ) {
        let codec = TwelveBodyCodec::new(catalog());
        let space = TwelveBodySpace::new(catalog());
        prop_assert_eq!(codec.decode(&codec.encode(&point)).unwrap(), point.to_vec());
        let code = BitString::from_bits(raw);
        if let Ok(p) = codec.decode(&code) {
            prop_assert!(space.contains(&p));
            prop_assert_eq!(codec.encode(&p), code);
        }
    }

    #[test]
    fn flat_positions_address_every_point(flat in 0u64..(9 * 7 * 5)) {
        let space = cut_space([9, 7, 5]);
        let p = space.point_at(flat);
        prop_assert!(space.contains(&p));
        prop_assert_eq!((p[0] as u64 * 7 + p[1] as u64) * 5 + p[2] as u64, flat);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn free_stage_estimate_bounds_production_no_dev(config in config_strategy(DevMode::No)) {
        let produced = simulate(catalog(), &config).annual_production() as f64;
        prop_assert!(produced <= line_estimate(catalog(), &config) + 1e-9);
    }

    #[test]
    fn free_stage_estimate_bounds_production_yes_dev(config in config_strategy(DevMode::Yes)) {
        let produced = simulate(catalog(), &config).annual_production() as f64;
        prop_assert!(produced <= line_estimate(catalog(), &config) + 1e-9);
    }
}

#[test]
fn reduction_matches_a_direct_filter() {
    let cat = catalog();
    let target: f64 = cat.monthly_targets().iter().sum();
    for dev in [DevMode::No, DevMode::Yes] {
        let rates: Vec<u8> = match dev {
            DevMode::No => vec![cat.nominal_rate_id()],
            DevMode::Yes => (1..=cat.n_rates() as u8).collect(),
        };
        let shops: Vec<ShopState> = (1..=cat.n_shifts() as u8)
            .flat_map(|s| rates.iter().map(move |&r| ShopState::new(s, r)))
            .collect();
        let annual: Vec<([ShopState; 2], f64)> = shops
            .iter()
            .flat_map(|&a| shops.iter().map(move |&b| [a, b]))
            .map(|pair| (pair, stage_annual(pair)))
            .collect();
        for margin in [0.015, 0.02, 0.025, 0.05] {
            let expected: BTreeSet<_> = annual
                .iter()
                .filter(|(_, e)| (e / target - 1.0).abs() <= margin + 1e-12)
                .map(|(pair, _)| pair.map(|s| (s.shift, s.rate)))
                .collect();
            let space = match reduce_space(cat, margin, dev) {
                Ok(s) => s,
                Err(_) => {
                    assert!(expected.is_empty(), "{dev} {margin}: reduction failed but states exist");
                    continue;
                }
            };
            for k in 0..STAGES {
                let got: BTreeSet<_> = space
                    .stage(k)
                    .iter()
                    .map(|a| a.state.shops.map(|s| (s.shift, s.rate)))
                    .collect();
                assert_eq!(got, expected, "{dev} margin {margin} stage {k}");
                for a in space.stage(k) {
                    assert!((a.annual_estimate - stage_annual(a.state.shops)).abs() < 1e-6);
                }
            }
        }
        let full = reduce_space(cat, 1.0, dev).unwrap();
        let n = annual.len() as u64;
        assert_eq!(full.total_size(), n * n * n);
    }
}

#[test]
fn toy_space_is_a_prefix_cut() {
    let space = common::toy_space(catalog());
    assert_eq!(space.total_size(), 384);
}
