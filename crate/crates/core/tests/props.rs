mod common;

use std::sync::Arc;

use proptest::prelude::*;
use runtimesearch::bytecode::{assemble, disassemble, verify_image, Instruction};
use runtimesearch::lang::{build, parse_unit, SourceUnit};

use common::{gen, instrumented, run_oracle, run_vm};

fn compile(
    src: &str,
) -> (
    runtimesearch::bytecode::ProgramImage,
    Vec<runtimesearch::lang::ast::Program>,
) {
    let unit = SourceUnit::new("gen.mls", src).unwrap();
    let image = build(std::slice::from_ref(&unit)).unwrap_or_else(|e| panic!("{e}\n{src}"));
    (image, vec![parse_unit(src, "gen").unwrap()])
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 96,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn random_programs_match_the_oracle(src in gen::program(), input in gen::input()) {
        let (plain, programs) = compile(&src);
        let vm = run_vm(instrumented(&plain, "*"), &input);
        let oracle = run_oracle(&programs, &input, "*");
        prop_assert_eq!(&vm.stdout, &oracle.stdout, "{}", src);
        prop_assert_eq!(&vm.fault_line, &oracle.fault_line, "{}", src);
        prop_assert_eq!(&vm.log, &oracle.log, "{}", src);
    }

    #[test]
    fn capture_points_are_transparent(src in gen::program(), input in gen::input()) {
        let (plain, _) = compile(&src);
        let before = run_vm(Arc::new(plain.clone()), &input);
        for scope in ["*", "gen.f0", "gen.main,gen.f1"] {
            let after = run_vm(instrumented(&plain, scope), &input);
            prop_assert_eq!(&after.stdout, &before.stdout);
            prop_assert_eq!(after.fault_line, before.fault_line);
        }
    }

    #[test]
    fn scoped_captures_match_the_scoped_oracle(src in gen::program(), input in gen::input()) {
        let (plain, programs) = compile(&src);
        for scope in ["gen.f*", "gen.main"] {
            let vm = run_vm(instrumented(&plain, scope), &input);
            let oracle = run_oracle(&programs, &input, scope);
            prop_assert_eq!(&vm.log, &oracle.log, "{} under {}", src, scope);
        }
    }

    #[test]
    fn disassembly_round_trips(src in gen::program()) {
        let (plain, _) = compile(&src);
        for image in [plain.clone(), (*instrumented(&plain, "*")).clone()] {
            let text = disassemble(&image);
            let back = assemble(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
            prop_assert_eq!(&back, &image);
            prop_assert_eq!(disassemble(&back), text);
        }
    }

    #[test]
    fn instrumented_images_verify_and_sites_match_opcodes(src in gen::program()) {
        let (plain, _) = compile(&src);
        let image = instrumented(&plain, "*");
        prop_assert!(verify_image(&image).is_ok());
        let mut seen = vec![0usize; image.capture_sites.len()];
        for (fid, f) in image.functions.iter().enumerate() {
            for (i, instr) in f.code.iter().enumerate() {
                if let Instruction::Capture(id) = instr {
                    let site = image.site_lookup(*id).unwrap();
                    seen[*id as usize] += 1;
                    prop_assert_eq!(site.instr_index as usize + 1, i);
                    prop_assert_eq!(&site.function, &image.functions[fid].name);
                }
            }
        }
        prop_assert!(seen.iter().all(|&n| n == 1), "{:?}", seen);
    }

    #[test]
    fn jumps_land_on_the_same_instructions(src in gen::program()) {
        let (plain, _) = compile(&src);
        let image = instrumented(&plain, "*");
        for (before, after) in plain.functions.iter().zip(&image.functions) {
            // original index -> instrumented index
            let map: Vec<usize> = (0..after.code.len())
                .filter(|&i| !matches!(after.code[i], Instruction::Capture(_)))
                .collect();
            prop_assert_eq!(map.len(), before.code.len());
            for (orig, instr) in before.code.iter().enumerate() {
                let moved = &after.code[map[orig]];
                match (instr.jump_target(), moved.jump_target()) {
                    (Some(t), Some(u)) => prop_assert_eq!(map[t as usize], u as usize),
                    (None, None) => prop_assert_eq!(instr, moved),
                    _ => prop_assert!(false, "jump mismatch at {}", orig),
                }
            }
        }
    }
}
