//! HTTP/JSON front end over a [`ConnectorService`].
//!
//! Messages are the simulator's; a body without `at` is stamped with the current time.
//! All handling goes through one lock, so requests are decided one at a time.

use std::sync::Arc;

use anyhow::{Context, Result};
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use dsp_policy::simulator::{ConnectorService, EvidenceMsg, Message, NegotiateMsg, SimError, TransferMsg};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};
use tokio::sync::Mutex;

type Shared = Arc<Mutex<ConnectorService>>;

pub fn app(svc: ConnectorService) -> Router {
    Router::new()
        .route("/negotiate", post(negotiate))
        .route("/request", post(request))
        .route("/evidence", post(evidence))
        .route("/audit", get(audit))
        .with_state(Arc::new(Mutex::new(svc)))
}

pub fn serve(svc: ConnectorService, addr: &str) -> Result<u8> {
    let rt = tokio::runtime::Runtime::new().context("cannot start runtime")?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("cannot bind {addr}"))?;
        log::info!("listening on {addr}");
        axum::serve(listener, app(svc)).await.context("server failed")
    })?;
    Ok(0)
}

fn error(status: StatusCode, message: impl ToString) -> Response {
    (status, Json(json!({"error": message.to_string()}))).into_response()
}

fn status_of(e: &SimError) -> StatusCode {
    match e {
        SimError::UnknownAsset(_)
        | SimError::UnknownOffer(_)
        | SimError::UnknownNegotiation(_)
        | SimError::UnknownUsage(_) => StatusCode::NOT_FOUND,
        SimError::NotAgreed(_) | SimError::IllegalTransition { .. } => StatusCode::CONFLICT,
        _ => StatusCode::BAD_REQUEST,
    }
}

async fn dispatch<T: DeserializeOwned>(state: Shared, mut body: Value, wrap: fn(T) -> Message) -> Response {
    if let Value::Object(m) = &mut body {
        m.entry("at").or_insert_with(|| json!(Utc::now()));
    }
    let msg = match serde_json::from_value::<T>(body) {
        Ok(m) => wrap(m),
        Err(e) => return error(StatusCode::BAD_REQUEST, e),
    };
    let at = msg.at();
    let mut svc = state.lock().await;
    match svc.handle(msg) {
        Ok(reply) => {
            svc.tick(at);
            Json(reply).into_response()
        }
        Err(e) => error(status_of(&e), e),
    }
}

async fn negotiate(State(s): State<Shared>, Json(body): Json<Value>) -> Response {
    dispatch::<NegotiateMsg>(s, body, Message::Negotiate).await
}

async fn request(State(s): State<Shared>, Json(body): Json<Value>) -> Response {
    dispatch::<TransferMsg>(s, body, Message::Request).await
}

async fn evidence(State(s): State<Shared>, Json(body): Json<Value>) -> Response {
    dispatch::<EvidenceMsg>(s, body, Message::Evidence).await
}

async fn audit(State(s): State<Shared>) -> Response {
    let text = s.lock().await.audit().to_ndjson();
    ([(header::CONTENT_TYPE, "application/x-ndjson")], text).into_response()
}
