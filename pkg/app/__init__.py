# WCamNet toolkit
