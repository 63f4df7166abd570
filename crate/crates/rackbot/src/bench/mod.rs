//! Experiment harnesses: fleet stress test and repeatability protocol.

pub mod repeat;
pub mod stress;
pub mod telemetry;

/// Address and credentials of one robot under test.
#[derive(Clone, Debug)]
pub struct Target {
    pub robot_id: String,
    pub base_url: String,
    pub token: String,
}

impl Target {
    pub fn from_rack(rack: &crate::rack::Rack) -> Vec<Target> {
        (0..rack.len())
            .map(|i| Target {
                robot_id: crate::config::robot_id(i),
                base_url: rack.base_url(i),
                token: rack.config().token.clone(),
            })
            .collect()
    }

    pub fn client(&self) -> crate::client::RobotClient {
        crate::client::RobotClient::new(self.base_url.clone(), self.token.clone())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("report has no data: {0}")]
    Empty(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
