//! `<image>.meta` sidecars: `key: value` lines overriding ingest flags.

use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Meta {
    pub image_id: Option<String>,
    pub specialty: Option<String>,
    pub class_name: Option<String>,
    pub sub_class: Option<String>,
    pub physician_id: Option<String>,
    pub keywords: Option<String>,
}

pub fn sidecar_path(image: &Path) -> PathBuf {
    let mut name = image.file_name().unwrap_or_default().to_os_string();
    name.push(".meta");
    image.with_file_name(name)
}

/// Blank lines and `#` comments are skipped; keys are case-insensitive and
/// `-` and `_` are interchangeable.
pub fn parse(text: &str) -> Result<Meta, String> {
    let mut meta = Meta::default();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| format!("line {}: expected 'key: value'", n + 1))?;
        let value = Some(value.trim().to_owned());
        match key.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "image_id" | "id" => meta.image_id = value,
            "specialty" | "speciality" => meta.specialty = value,
            "class" | "class_name" => meta.class_name = value,
            "sub_class" | "subclass" => meta.sub_class = value,
            "physician" | "physician_id" => meta.physician_id = value,
            "keywords" => meta.keywords = value,
            other => return Err(format!("line {}: unknown key '{other}'", n + 1)),
        }
    }
    Ok(meta)
}

pub fn render(meta: &Meta) -> String {
    let mut out = String::new();
    for (key, value) in [
        ("image_id", &meta.image_id),
        ("specialty", &meta.specialty),
        ("class", &meta.class_name),
        ("sub_class", &meta.sub_class),
        ("physician", &meta.physician_id),
        ("keywords", &meta.keywords),
    ] {
        if let Some(v) = value {
            out.push_str(&format!("{key}: {v}\n"));
        }
    }
    out
}
