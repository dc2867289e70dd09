use std::path::Path;

use woz_core::Scenario;

#[test]
fn bundled_scenario_media_exists() {
    let assets = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets");
    let s = Scenario::reference();
    let mut refs: Vec<&String> = s.world.media.values().collect();
    refs.extend(s.instructions.video_operator.iter());
    refs.extend(s.instructions.video_wizard.iter());
    assert_eq!(refs.len(), 8);
    for r in refs {
        let p = assets.join(r);
        let bytes = std::fs::read(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        match p.extension().and_then(|e| e.to_str()) {
            Some("gif") => assert!(bytes.starts_with(b"GIF8"), "{r}"),
            Some("mp4") => assert_eq!(&bytes[4..8], b"ftyp", "{r}"),
            other => panic!("unexpected media type {other:?}"),
        }
    }
}
