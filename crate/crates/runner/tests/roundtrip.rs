use proptest::prelude::*;
use spinhydro_runner::config::{parse_config, render_config, DictChoice, ExperimentPlan, Kind};
use spinhydro_runner::table::{format_f64, Cell, ReadTable, Table};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn floats_round_trip_through_text(bits in any::<u64>()) {
        let v = f64::from_bits(bits);
        prop_assume!(v.is_finite());
        let back: f64 = format_f64(v).parse().unwrap();
        prop_assert_eq!(back.to_bits(), v.to_bits());
    }

    #[test]
    fn tables_round_trip(
        rows in prop::collection::vec((any::<f64>(), prop::option::of(-1e3f64..1e3), 0usize..10_000, "[a-z ,\"]{0,8}"), 0..20)
    ) {
        let mut t = Table::new(&[("x", "time"), ("y", ""), ("k", ""), ("s", "")]).meta("note", "a: b");
        for (x, y, k, s) in &rows {
            t.push(vec![(*x).into(), (*y).into(), (*k).into(), Cell::Text(s.clone())]);
        }
        let back = ReadTable::parse(std::str::from_utf8(&t.to_bytes()).unwrap()).unwrap();
        prop_assert_eq!(back.meta_value("note"), Some("a: b"));
        prop_assert_eq!(back.rows.len(), rows.len());
        let xs = back.floats("x").unwrap();
        let ys = back.floats("y").unwrap();
        for (i, (x, y, k, s)) in rows.iter().enumerate() {
            let got = xs[i].unwrap();
            prop_assert!(got.to_bits() == x.to_bits() || (x.is_nan() && got.is_nan()));
            prop_assert_eq!(ys[i], *y);
            prop_assert_eq!(&back.rows[i][2], &k.to_string());
            prop_assert_eq!(&back.rows[i][3], s);
        }
    }

    #[test]
    fn rendered_configs_parse_back(
        n in 3usize..9,
        j in 0.1f64..3.0,
        delta in -2.0f64..2.0,
        seed in any::<u64>(),
        size in 1usize..600,
        use_b in any::<bool>(),
    ) {
        let mut p = ExperimentPlan::defaults(Kind::Validate);
        p.chain.n_sites = n;
        p.chain.j = j;
        p.chain.delta = delta;
        p.base_seed = seed;
        p.ensemble_size = size;
        p.observe_site = n - 1;
        p.dictionaries = if use_b { vec![DictChoice::B, DictChoice::Hydro] } else { vec![DictChoice::A] };
        let back = parse_config(&render_config(&p)).unwrap();
        prop_assert_eq!(back, p);
    }
}
