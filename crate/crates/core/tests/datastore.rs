use msmac::datastore::{self, Store};
use msmac::sim::{simulate, SimOptions};
use msmac::surrogate::{generate_dataset, train, DatasetConfig, RegressorSpec, TrainConfig};
use msmac::assigner::{overall_assign, AssignOptions};
use msmac::error::Error;
use msmac::scenario::GeneratorSpec;
use msmac::types::{ProtocolParams, QosSpec};

#[test]
fn report_and_assignment_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let sc = GeneratorSpec { counts: [5, 20, 20], ..GeneratorSpec::industrial() }.generate(QosSpec::industrial_default(), 4).unwrap();
    let p = ProtocolParams::new(4, 5, 15, 90);
    let r = overall_assign(&sc, &p, &AssignOptions::default()).unwrap();
    let rep = simulate(&sc.devices, &p, &sc.qos, &r.assignment, &SimOptions::new(3.0, 9)).unwrap();

    let run = Store::new(dir.path()).create_run("t").unwrap();
    datastore::save_scenario(&run.file("s.json"), &sc).unwrap();
    datastore::save_assignment(&run.file("a.json"), &r.assignment).unwrap();
    datastore::save_report(&run.file("r.json"), &rep).unwrap();
    assert_eq!(datastore::load_scenario(&run.file("s.json")).unwrap(), sc);
    assert_eq!(datastore::load_assignment(&run.file("a.json")).unwrap(), r.assignment);
    assert_eq!(datastore::load_report(&run.file("r.json")).unwrap(), rep);

    // Kind is checked.
    assert!(matches!(datastore::load_report(&run.file("a.json")), Err(Error::Parse { .. })));
}

#[test]
fn model_and_dataset_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut dc = DatasetConfig::new(4, 2);
    dc.sim_duration = 1.0;
    dc.sims_per_entry = 1;
    dc.sampler.hp = [2, 6];
    dc.sampler.rp = [5, 20];
    dc.sampler.lp = [5, 30];
    let ds = generate_dataset(&dc).unwrap();
    assert_eq!(ds.entries.len(), 4 * dc.grid.len());

    let spec = RegressorSpec { widths: vec![8, 13], activations: vec![msmac::surrogate::Activation::Elu, msmac::surrogate::Activation::Relu], dropout: vec![0.2, 0.0] };
    let tc = TrainConfig { epochs: 2, batch: 4, seed: 3, ..TrainConfig::default() };
    let model = train(spec, &ds, &tc).unwrap();

    let store = Store::new(dir.path());
    let dpath = store.datasets().unwrap().join("d.txt");
    let mpath = store.models().unwrap().join("m.json");
    datastore::save_dataset(&dpath, &ds).unwrap();
    datastore::save_model(&mpath, &model).unwrap();
    assert_eq!(datastore::load_dataset(&dpath).unwrap(), ds);
    let back = datastore::load_model(&mpath).unwrap();
    assert_eq!(back, model);

    let grid = DatasetConfig::default_grid();
    let sc = dc.sampler.sample(11).unwrap();
    assert_eq!(back.predict(&sc.devices, &grid).unwrap(), model.predict(&sc.devices, &grid).unwrap());
}
