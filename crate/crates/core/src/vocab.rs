//! Namespace constants and prefixed-name expansion for the vocabularies the engine knows.

pub const ODRL: &str = "http://www.w3.org/ns/odrl/2/";
pub const DC11: &str = "http://purl.org/dc/elements/1.1/";
pub const XSD: &str = "http://www.w3.org/2001/XMLSchema#";
pub const RDF: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
pub const RDFS: &str = "http://www.w3.org/2000/01/rdf-schema#";
pub const SH: &str = "http://www.w3.org/ns/shacl#";
/// Data-spaces profile namespace, in the form used by policy documents.
pub const DSP: &str = "http://www.w3id.org/dataspaces-policies/";
/// Alternate spelling of the data-spaces profile namespace. Treated as an alias of [`DSP`].
pub const DSP_ALIAS: &str = "https://w3id.org/dataspaces-policies/";

/// Prefix bindings written at the top of every canonical serialization, in order.
pub const CANONICAL_PREFIXES: [(&str, &str); 5] = [
    ("odrl", ODRL),
    ("dc11", DC11),
    ("xsd", XSD),
    ("rdf", RDF),
    ("dsp", DSP),
];

/// Expands `prefix:local` for the well-known prefixes. Returns `None` for anything else.
pub fn expand_curie(curie: &str) -> Option<String> {
    let (prefix, local) = curie.split_once(':')?;
    if local.starts_with("//") {
        return None;
    }
    let ns = match prefix {
        "odrl" => ODRL,
        "dc11" => DC11,
        "xsd" => XSD,
        "rdf" => RDF,
        "rdfs" => RDFS,
        "sh" => SH,
        "dsp" => DSP,
        _ => return None,
    };
    Some(format!("{ns}{local}"))
}

/// Rewrites the alias profile namespace onto the primary one.
pub fn canonical_namespace(iri: &str) -> std::borrow::Cow<'_, str> {
    match iri.strip_prefix(DSP_ALIAS) {
        Some(rest) => format!("{DSP}{rest}").into(),
        None => iri.into(),
    }
}

pub fn odrl(local: &str) -> String {
    format!("{ODRL}{local}")
}

pub fn dsp(local: &str) -> String {
    format!("{DSP}{local}")
}

pub fn xsd(local: &str) -> String {
    format!("{XSD}{local}")
}
