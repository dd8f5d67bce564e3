use std::fs;
use std::path::Path;

use super::atomic_write;
use crate::error::{Error, Result};
use crate::scene::SceneDescriptor;

/// Loads a scene descriptor and re-runs the validator.
pub fn read_scene(path: &Path) -> Result<SceneDescriptor> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let scene: SceneDescriptor = serde_json::from_str(&text)?;
    scene.validate()?;
    Ok(scene)
}

/// Writes pretty JSON. Floats use the shortest representation that parses
/// back to the identical `f64`.
pub fn write_scene(scene: &SceneDescriptor, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(scene)?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::example_descriptor;

    #[test]
    fn round_trip_preserves_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.json");
        let mut scene = example_descriptor();
        scene.rt60 = 0.1 + 0.2 + 0.1;
        scene.rng_seed = u64::MAX;
        write_scene(&scene, &path).unwrap();
        assert_eq!(read_scene(&path).unwrap(), scene);
    }

    #[test]
    fn load_rejects_invalid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.json");
        let mut scene = example_descriptor();
        scene.rt60 = 1.5;
        write_scene(&scene, &path).unwrap();
        assert!(matches!(
            read_scene(&path),
            Err(Error::Validation { constraint: "rt60", .. })
        ));
    }
}
