//! Monocular visual landing: template detection by homography, Kalman
//! tracking of the pad in the image, image-based PID control with an ON/OFF
//! descent law, and a kinematic world to close the loop.

pub mod controller;
pub mod harness;
pub mod homography;
pub mod observation;
pub mod simworld;
pub mod tracker;
