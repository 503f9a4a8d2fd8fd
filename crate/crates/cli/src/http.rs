use std::thread;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

pub(crate) fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into()
}

/// POSTs `body` as JSON and decodes the JSON reply. Transport errors, 429
/// and 5xx are retried up to `retries` more times with doubling backoff;
/// other statuses and undecodable replies fail at once.
pub(crate) fn post_json<Q: Serialize, R: DeserializeOwned>(
    agent: &ureq::Agent,
    url: &str,
    body: &Q,
    retries: u32,
) -> Result<R, String> {
    let mut attempt = 0;
    loop {
        let err = match agent.post(url).send_json(body) {
            Ok(mut resp) => {
                let status = resp.status().as_u16();
                if (200..300).contains(&status) {
                    return resp
                        .body_mut()
                        .read_json::<R>()
                        .map_err(|e| format!("malformed response from {url}: {e}"));
                }
                if status != 429 && status < 500 {
                    return Err(format!("{url} answered HTTP {status}"));
                }
                format!("{url} answered HTTP {status}")
            }
            Err(e) => format!("request to {url} failed: {e}"),
        };
        if attempt >= retries {
            return Err(format!("{err} (after {} attempts)", attempt + 1));
        }
        thread::sleep(Duration::from_millis(50 << attempt.min(6)));
        attempt += 1;
    }
}
