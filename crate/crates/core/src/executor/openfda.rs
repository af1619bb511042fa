//! openFDA drug label client. Each query returns exactly one label field.

use serde_json::Value;
use thiserror::Error;

use super::{ExecError, Executor, OPENFDA_KEY_VAR};
use crate::http::HttpRequest;
use crate::registry::ValidatedCall;

pub const OPENFDA_LABEL_URL: &str = "https://api.fda.gov/drug/label.json";

pub const LABEL_FIELDS: [&str; 22] = [
    "indications_and_usage",
    "dosage_and_administration",
    "dosage_forms_and_strengths",
    "contraindications",
    "warnings",
    "warnings_and_cautions",
    "precautions",
    "boxed_warning",
    "adverse_reactions",
    "drug_interactions",
    "use_in_specific_populations",
    "pregnancy",
    "nursing_mothers",
    "pediatric_use",
    "geriatric_use",
    "overdosage",
    "description",
    "clinical_pharmacology",
    "mechanism_of_action",
    "pharmacokinetics",
    "how_supplied",
    "active_ingredient",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OpenFdaError {
    #[error("unknown label field `{0}`")]
    UnknownField(String),
    #[error("no openFDA label matches {0}")]
    NotFound(String),
    #[error("openFDA upstream error: {0}")]
    UpstreamError(String),
    #[error("search value must be non-empty")]
    EmptySearch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelSearchField {
    BrandName,
    GenericName,
    /// Brand or generic name.
    AnyName,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelQuery {
    pub field: LabelSearchField,
    pub value: String,
}

impl LabelQuery {
    pub fn brand(value: impl Into<String>) -> Self {
        Self {
            field: LabelSearchField::BrandName,
            value: value.into(),
        }
    }

    pub fn generic(value: impl Into<String>) -> Self {
        Self {
            field: LabelSearchField::GenericName,
            value: value.into(),
        }
    }

    /// Reads `brand_name`, `generic_name` or `drug_name` from the call.
    pub fn from_call(call: &ValidatedCall) -> Result<Self, String> {
        let pick = [
            ("brand_name", LabelSearchField::BrandName),
            ("generic_name", LabelSearchField::GenericName),
            ("drug_name", LabelSearchField::AnyName),
        ];
        pick.iter()
            .find_map(|(arg, field)| {
                call.arg_text(arg).map(|value| LabelQuery { field: *field, value })
            })
            .ok_or_else(|| "label lookup needs `drug_name`, `brand_name` or `generic_name`".to_string())
    }

    pub fn search_expr(&self) -> String {
        let v = self.value.trim().replace('"', "");
        match self.field {
            LabelSearchField::BrandName => format!("openfda.brand_name:\"{v}\""),
            LabelSearchField::GenericName => format!("openfda.generic_name:\"{v}\""),
            LabelSearchField::AnyName => {
                format!("openfda.brand_name:\"{v}\" OR openfda.generic_name:\"{v}\"")
            }
        }
    }
}

pub fn label_request(base: &str, query: &LabelQuery, api_key: Option<&str>) -> HttpRequest {
    let mut url = url::Url::parse(base).expect("openFDA base is a valid URL");
    {
        let mut q = url.query_pairs_mut();
        q.append_pair("search", &query.search_expr());
        q.append_pair("limit", "1");
        if let Some(key) = api_key {
            q.append_pair("api_key", key);
        }
    }
    HttpRequest::get(url.to_string())
}

/// Text of one label field for the first label matching `query`.
pub fn openfda_label_field(executor: &Executor, query: &LabelQuery, field: &str) -> Result<String, OpenFdaError> {
    if !LABEL_FIELDS.contains(&field) {
        return Err(OpenFdaError::UnknownField(field.to_string()));
    }
    if query.value.trim().is_empty() {
        return Err(OpenFdaError::EmptySearch);
    }
    let key = executor.env().api_key(OPENFDA_KEY_VAR);
    let request = label_request(&executor.env().openfda_base, query, key.as_deref());
    let body = match executor.fetch_ok(&request) {
        Ok(body) => body,
        Err(ExecError::Status(404)) => return Err(OpenFdaError::NotFound(query.search_expr())),
        Err(e) => return Err(OpenFdaError::UpstreamError(e.to_string())),
    };
    let doc: Value =
        serde_json::from_str(&body).map_err(|e| OpenFdaError::UpstreamError(format!("response is not JSON: {e}")))?;
    let label = doc
        .get("results")
        .and_then(Value::as_array)
        .and_then(|r| r.first())
        .ok_or_else(|| OpenFdaError::NotFound(query.search_expr()))?;
    let parts: Vec<&str> = match label.get(field) {
        Some(Value::Array(items)) => items.iter().filter_map(Value::as_str).collect(),
        Some(Value::String(s)) => vec![s.as_str()],
        _ => Vec::new(),
    };
    if parts.is_empty() {
        return Err(OpenFdaError::NotFound(format!("{} (field {field})", query.search_expr())));
    }
    Ok(parts.join("\n\n"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::executor::{ExecMode, ExecutionEnv};
    use crate::http::{FixtureStore, HttpResponse, OfflineTransport};
    use std::sync::Arc;

    const BODY: &str = r#"{"meta": {}, "results": [{"warnings": ["Bleeding risk."], "pregnancy": ["Avoid."], "openfda": {"brand_name": ["X"]}}]}"#;

    fn executor_with(records: &[(HttpRequest, u16, &str)]) -> (Executor, Arc<OfflineTransport>, tempfile::TempDir) {
        let dir = tempfile::tempdir().unwrap();
        let store = FixtureStore::new(dir.path());
        for (req, status, body) in records {
            store
                .save(req, &HttpResponse { status: *status, body: body.to_string() }, 0)
                .unwrap();
        }
        let offline = Arc::new(OfflineTransport::new());
        let env = ExecutionEnv {
            mode: ExecMode::FixturesOnly,
            cache_dir: Some(dir.path().into()),
            ..Default::default()
        };
        (Executor::new(env, offline.clone()), offline, dir)
    }

    #[test]
    fn returns_only_requested_field() {
        let q = LabelQuery::brand("X");
        let (ex, offline, _d) = executor_with(&[(label_request(OPENFDA_LABEL_URL, &q, None), 200, BODY)]);
        assert_eq!(openfda_label_field(&ex, &q, "warnings").unwrap(), "Bleeding risk.");
        assert!(matches!(
            openfda_label_field(&ex, &q, "adverse_reactions"),
            Err(OpenFdaError::NotFound(_))
        ));
        assert_eq!(offline.attempts(), 0);
    }

    #[test]
    fn unknown_field_and_no_match() {
        let q = LabelQuery::brand("Nothing");
        let (ex, _, _d) = executor_with(&[(label_request(OPENFDA_LABEL_URL, &q, None), 404, "{}")]);
        assert_eq!(
            openfda_label_field(&ex, &q, "colour"),
            Err(OpenFdaError::UnknownField("colour".into()))
        );
        assert!(matches!(openfda_label_field(&ex, &q, "warnings"), Err(OpenFdaError::NotFound(_))));
    }

    #[test]
    fn api_key_does_not_change_fixture_identity() {
        let q = LabelQuery::generic("warfarin");
        assert_eq!(
            label_request(OPENFDA_LABEL_URL, &q, None).fingerprint(),
            label_request(OPENFDA_LABEL_URL, &q, Some("secret")).fingerprint()
        );
    }
}
