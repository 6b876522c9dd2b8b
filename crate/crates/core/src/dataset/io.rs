//! Track CSV plus JSON map / signal files.
//!
//! Track file: header row, required columns `track_id,t,agent_type,x,y`,
//! optional `vx,vy,heading` (accepted, not used). A scene directory holds
//! `tracks.csv` and optionally `map.json` and `signals.json`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use super::{
    AgentType, DatasetError, MapSpec, Scene, SignalTimeline, Track, TrackId, TrackPoint,
};

pub const TRACKS_FILE: &str = "tracks.csv";
pub const MAP_FILE: &str = "map.json";
pub const SIGNALS_FILE: &str = "signals.json";

/// Maps the canonical column names onto the names used in a given file.
#[derive(Clone, Debug)]
pub struct ColumnSchema {
    pub track_id: String,
    pub t: String,
    pub agent_type: String,
    pub x: String,
    pub y: String,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        Self {
            track_id: "track_id".into(),
            t: "t".into(),
            agent_type: "agent_type".into(),
            x: "x".into(),
            y: "y".into(),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.display().to_string(), source }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, DatasetError> {
    let f = File::open(path).map_err(io_err(path))?;
    serde_json::from_reader(BufReader::new(f))
        .map_err(|source| DatasetError::Json { path: path.display().to_string(), source })
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), DatasetError> {
    let f = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|source| DatasetError::Json { path: path.display().to_string(), source })?;
    w.write_all(b"\n").map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

/// Reads a track CSV into a scene. `map` and `signals` are attached when given.
pub fn load_tracks(
    path: &Path,
    schema: &ColumnSchema,
    map: Option<&Path>,
    signals: Option<&Path>,
) -> Result<Scene, DatasetError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut rdr = csv::Reader::from_reader(BufReader::new(file));
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| DatasetError::MissingColumn(name.to_string()))
    };
    let (ci, ct, ca, cx, cy) = (
        col(&schema.track_id)?,
        col(&schema.t)?,
        col(&schema.agent_type)?,
        col(&schema.x)?,
        col(&schema.y)?,
    );

    let mut grouped: BTreeMap<TrackId, (AgentType, Vec<TrackPoint>)> = BTreeMap::new();
    for (row_idx, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = row_idx + 2;
        let field = |c: usize, name: &str| -> Result<f64, DatasetError> {
            let raw = rec.get(c).unwrap_or("").trim();
            raw.parse::<f64>().map_err(|_| DatasetError::BadValue {
                row,
                field: name.to_string(),
                value: raw.to_string(),
            })
        };
        let raw_id = rec.get(ci).unwrap_or("").trim();
        let id: TrackId = raw_id.parse().map_err(|_| DatasetError::BadValue {
            row,
            field: schema.track_id.clone(),
            value: raw_id.to_string(),
        })?;
        let agent: AgentType = rec.get(ca).unwrap_or("").trim().parse()?;
        let p = TrackPoint::new(field(ct, &schema.t)?, field(cx, &schema.x)?, field(cy, &schema.y)?);
        if !(p.t.is_finite() && p.x.is_finite() && p.y.is_finite()) {
            return Err(DatasetError::NonFinite { track: id });
        }
        let entry = grouped.entry(id).or_insert_with(|| (agent, Vec::new()));
        if entry.0 != agent {
            return Err(DatasetError::InconsistentAgentType(id));
        }
        entry.1.push(p);
    }

    let mut tracks = Vec::with_capacity(grouped.len());
    for (track_id, (agent_type, mut points)) in grouped {
        points.sort_by(|a, b| a.t.total_cmp(&b.t));
        if points.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(DatasetError::NonMonotone(track_id));
        }
        tracks.push(Track { track_id, agent_type, points });
    }

    let scene_id = scene_id_for(path);
    let scene = Scene {
        scene_id,
        tracks,
        map: map.map(read_json::<MapSpec>).transpose()?,
        signals: signals.map(read_json::<SignalTimeline>).transpose()?,
    };
    scene.validate()?;
    Ok(scene)
}

fn scene_id_for(tracks_path: &Path) -> String {
    // tracks.csv inside a scene directory takes the directory name
    let stem = tracks_path.file_stem().and_then(|s| s.to_str()).unwrap_or("scene");
    if stem == "tracks" {
        if let Some(dir) = tracks_path.parent().and_then(|p| p.file_name()).and_then(|s| s.to_str()) {
            return dir.to_string();
        }
    }
    stem.to_string()
}

/// Loads `tracks.csv` (+ `map.json`, `signals.json` when present) from `dir`.
pub fn load_scene_dir(dir: &Path) -> Result<Scene, DatasetError> {
    let map = dir.join(MAP_FILE);
    let signals = dir.join(SIGNALS_FILE);
    load_tracks(
        &dir.join(TRACKS_FILE),
        &ColumnSchema::default(),
        map.exists().then_some(map.as_path()),
        signals.exists().then_some(signals.as_path()),
    )
}

pub fn write_tracks(path: &Path, scene: &Scene) -> Result<(), DatasetError> {
    let f = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(f));
    w.write_record(["track_id", "t", "agent_type", "x", "y"])?;
    for tr in &scene.tracks {
        let id = tr.track_id.to_string();
        for p in &tr.points {
            w.write_record([
                id.as_str(),
                &p.t.to_string(),
                tr.agent_type.as_str(),
                &p.x.to_string(),
                &p.y.to_string(),
            ])?;
        }
    }
    w.flush().map_err(io_err(path))
}

/// Writes a scene as a directory readable by [`load_scene_dir`].
pub fn write_scene_dir(dir: &Path, scene: &Scene) -> Result<(), DatasetError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_tracks(&dir.join(TRACKS_FILE), scene)?;
    if let Some(m) = &scene.map {
        write_json(&dir.join(MAP_FILE), m)?;
    }
    if let Some(s) = &scene.signals {
        write_json(&dir.join(SIGNALS_FILE), s)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        let mut f = File::create(&p).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn minimal_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "a.csv", "track_id,t,agent_type,x,y\n1,0.0,small_vehicle,0,0\n1,0.5,small_vehicle,1,0\n");
        let s = load_tracks(&p, &ColumnSchema::default(), None, None).unwrap();
        assert_eq!(s.scene_id, "a");
        assert_eq!(s.tracks.len(), 1);
        assert_eq!(s.tracks[0].points.len(), 2);
    }

    #[test]
    fn rows_sorted_and_optional_columns_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "b.csv",
            "x,y,vx,track_id,agent_type,t,heading\n1,0,0,3,pedestrian,0.5,0\n0,0,0,3,pedestrian,0.0,0\n",
        );
        let s = load_tracks(&p, &ColumnSchema::default(), None, None).unwrap();
        assert_eq!(s.tracks[0].points[0].t, 0.0);
        assert_eq!(s.tracks[0].agent_type, AgentType::Pedestrian);
    }

    #[test]
    fn duplicate_timestamp_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "c.csv", "track_id,t,agent_type,x,y\n1,0.0,small_vehicle,0,0\n1,0.0,small_vehicle,1,0\n");
        let err = load_tracks(&p, &ColumnSchema::default(), None, None).unwrap_err();
        assert!(err.to_string().contains("non-monotone timestamps"), "{err}");
    }

    #[test]
    fn missing_column_and_unknown_tag() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "d.csv", "track_id,t,x,y\n1,0.0,0,0\n");
        assert!(matches!(
            load_tracks(&p, &ColumnSchema::default(), None, None),
            Err(DatasetError::MissingColumn(c)) if c == "agent_type"
        ));
        let p = write(dir.path(), "e.csv", "track_id,t,agent_type,x,y\n1,0.0,tram,0,0\n");
        assert!(matches!(
            load_tracks(&p, &ColumnSchema::default(), None, None),
            Err(DatasetError::UnknownAgentType(_))
        ));
    }

    #[test]
    fn custom_schema() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "f.csv", "id,time,cls,px,py\n9,0.0,two_wheeler,0,0\n9,1.0,two_wheeler,2,2\n");
        let schema = ColumnSchema {
            track_id: "id".into(),
            t: "time".into(),
            agent_type: "cls".into(),
            x: "px".into(),
            y: "py".into(),
        };
        let s = load_tracks(&p, &schema, None, None).unwrap();
        assert_eq!(s.tracks[0].track_id, 9);
    }
}
