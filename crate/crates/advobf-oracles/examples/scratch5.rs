use advobf::attack::{attack, AttackConfig, OptimizerKind};
use advobf_oracles::{exhaustive_attack, TinyInstance};

fn run(n: u64, az: f64, au: f64, inner: usize) {
    let (mut ao_exact, mut ao_ok, mut jo_ok, mut ao_le_jo) = (0, 0, 0, 0);
    let (mut worst_ao, mut worst_jo) = (0.0f64, 0.0f64);
    let t0 = std::time::Instant::now();
    for seed in 0..n {
        let inst = TinyInstance::generate(seed);
        let oracle = exhaustive_attack(&inst.model, &inst.entry, inst.k);
        let mut ao_cfg = AttackConfig::new(OptimizerKind::Ao, inst.k, 1000 + seed);
        ao_cfg.restarts = 10;
        ao_cfg.iters = 3;
        ao_cfg.draws = 10;
        ao_cfg.alpha_z = az;
        ao_cfg.alpha_u = au;
        ao_cfg.inner_z = inner;
        ao_cfg.inner_u = inner;
        let ao = attack(&inst.model, &inst.entry, &ao_cfg).unwrap();
        let mut jo_cfg = ao_cfg.clone();
        jo_cfg.optimizer = OptimizerKind::Jo;
        jo_cfg.iters = 10;
        let jo = attack(&inst.model, &inst.entry, &jo_cfg).unwrap();
        let scale = oracle.best_loss.abs().max(1e-12);
        let ao_gap = (ao.discrete_loss - oracle.best_loss) / scale;
        let jo_gap = (jo.discrete_loss - oracle.best_loss) / scale;
        worst_ao = worst_ao.max(ao_gap);
        worst_jo = worst_jo.max(jo_gap);
        if ao_gap <= 1e-9 { ao_exact += 1; }
        if ao_gap <= 0.10 { ao_ok += 1; }
        if jo_gap <= 0.15 { jo_ok += 1; }
        if ao.discrete_loss <= jo.discrete_loss { ao_le_jo += 1; }
    }
    println!("az={az} au={au} inner={inner}: AO exact {ao_exact} | AO<=10% {ao_ok} (worst {worst_ao:.3}) | JO<=15% {jo_ok} (worst {worst_jo:.3}) | AO<=JO {ao_le_jo} | {:.1?}", t0.elapsed());
}

fn main() {
    run(100, 0.5, 0.5, 10);
    run(100, 0.5, 1.0, 10);
    run(100, 0.5, 1.0, 12);
    run(100, 0.8, 0.8, 10);
}
